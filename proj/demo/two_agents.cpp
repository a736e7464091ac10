// Two agents, one process: A holds the response and x1..x8, B holds x5..x12.
// B sketches its columns, A tests whether they help, then the two train
// together and predict a few new rows.

#include "aeal/experiments.hpp"

#include <iomanip>
#include <iostream>

using namespace aeal;

int main() {
  Rng rng(2024);
  SimDesign d;
  d.setting = Setting::S2;
  d.n = 2000;
  d.rho = 0.1;
  d.fam = LossFamily::logistic();
  d.hypothesis = Hypothesis::H1;
  const SimData sim = simulate(d, rng);
  const AgentView a = sim.data.view(Agent::A);
  const AgentView b = sim.data.view(Agent::B);
  const Vector& y = sim.data.y();

  // Stage 1: noisy sketch of B's columns, Wald test at A.
  SketchOptions so;
  so.t = 2;
  so.u_seed = 7;
  so.noise_scale = 0.1;
  const SketchPackage pkg = make_sketch(b.design, so);
  ScreenOptions sopt;
  sopt.p_b = static_cast<int>(b.cols());
  const ScreenReport rep = screen_package(ScreenTest::Wald, a.design, y, pkg, d.fam, sopt);
  std::cout << std::setprecision(6) << "screening: W = " << rep.decision.statistic << " on " << rep.decision.df
            << " df, p = " << rep.decision.p_value << (rep.decision.reject ? "  (B adds signal)\n" : "  (no evidence that B adds signal)\n");

  // Stage 2: alternating offset fits.
  TrainConfig tc;
  tc.fam = d.fam;
  const TrainSession s = train(a.design, y, b.design, tc);
  std::cout << "training: " << s.rounds << " rounds, " << s.rounds_transmitted << " offset messages, "
            << s.bytes_transmitted << " bytes, stopped by " << stop_reason_name(s.stop_reason) << '\n';

  const FitResult oracle = oracle_fit(sim.data.pooled_design(), y, d.fam);
  const Vector pooled = map_T(s.beta_a, s.beta_b, sim.data.ownership());
  std::cout << "max |AE-AL - pooled fit| over coefficients: " << (pooled - oracle.beta).cwiseAbs().maxCoeff() << '\n';

  Rng prng(99);
  const Matrix xnew = gen_covariates(3, 12, d.rho, prng);
  const Matrix xa_new = agent_columns(xnew, sim.data.ownership(), Agent::A);
  const Matrix xb_new = agent_columns(xnew, sim.data.ownership(), Agent::B);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Prediction p = predict(s, xa_new.row(i).transpose(), xb_new.row(i).transpose());
    std::cout << "P(y=1 | x" << i << ") = " << p.point << "  [" << p.lo << ", " << p.hi << "]\n";
  }
}
