#pragma once

#include "aeal/baselines.hpp"
#include "aeal/privacy.hpp"
#include "aeal/protocol.hpp"
#include "aeal/screening.hpp"
#include "aeal/sim.hpp"
#include "aeal/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace aeal {

/// Runs body(i) for i in [0, count) on up to `threads` workers (0: hardware
/// concurrency). Results must go to per-index slots; the first exception wins.
inline void parallel_for(int count, const std::function<void(int)>& body, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(count, 1)));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// Seed streams. Every replication draws its data from its own stream, so
// results do not depend on thread scheduling.
namespace stream {
inline constexpr std::uint64_t data = 0x1000;
inline constexpr std::uint64_t sketch = 0x2000;
inline constexpr std::uint64_t noise = 0x3000;
inline constexpr std::uint64_t eval = 0x4000;
inline constexpr std::uint64_t mask = 0x5000;
}  // namespace stream

inline std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t kind, std::uint64_t rep, std::uint64_t sub = 0) {
  return derive_seed(derive_seed(derive_seed(seed, kind), rep), sub);
}

struct ScreenExperiment {
  Setting setting = Setting::S2;
  Eigen::Index n = 2000;
  double rho = 0.1;
  LossFamily fam = LossFamily::logistic();
  ScreenTest test = ScreenTest::Wald;
  Hypothesis hypothesis = Hypothesis::H0;
  int reps = 100;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double ridge = 0.0;
  bool drop_dependent = true;
  unsigned threads = 0;
};

/// One screening run of replication `rep` with a given sketch width, noise
/// scale and projection seed.
inline ScreenReport screen_once(const ScreenExperiment& e, const SimData& sd, int t, double noise_scale,
                                std::uint64_t u_seed, std::uint64_t noise_seed) {
  const AgentView va = sd.data.view(Agent::A);
  const AgentView vb = sd.data.view(Agent::B);
  SketchOptions so;
  so.t = t;
  so.u_seed = u_seed;
  so.noise_seed = noise_seed;
  if (noise_scale > 0.0) so.noise_scale = noise_scale;
  const SketchPackage pkg = make_sketch(vb.design, so);
  ScreenOptions opt;
  opt.alpha = e.alpha;
  opt.ridge = e.ridge;
  opt.drop_dependent = e.drop_dependent;
  opt.p_b = static_cast<int>(vb.cols());
  return screen_package(e.test, va.design, sd.data.y(), pkg, e.fam, opt);
}

inline SimData simulate_rep(const ScreenExperiment& e, int rep) {
  Rng rng(rep_seed(e.seed, stream::data, static_cast<std::uint64_t>(rep)));
  SimDesign d;
  d.setting = e.setting;
  d.n = e.n;
  d.rho = e.rho;
  d.fam = e.fam;
  d.hypothesis = e.hypothesis;
  return simulate(d, rng);
}

struct QqRow {
  int replication = 0;
  int t = 0;
  double p_value = 1.0;
  double statistic = 0.0;
  int df = 0;
};

/// p-values of the screening statistic under the configured hypothesis for
/// t = t_min..t_max, one fresh U per (replication, t).
inline std::vector<QqRow> qq_experiment(const ScreenExperiment& e, double noise_scale, int t_min, int t_max) {
  require(t_min >= 1 && t_max >= t_min, Errc::InvalidArgument, "need 1 <= t_min <= t_max");
  const int nt = t_max - t_min + 1;
  std::vector<QqRow> rows(static_cast<std::size_t>(e.reps * nt));
  parallel_for(
      e.reps,
      [&](int r) {
        const SimData sd = simulate_rep(e, r);
        for (int t = t_min; t <= t_max; ++t) {
          const auto ur = static_cast<std::uint64_t>(r);
          const auto ut = static_cast<std::uint64_t>(t);
          const ScreenReport rep = screen_once(e, sd, t, noise_scale, rep_seed(e.seed, stream::sketch, ur, ut),
                                               rep_seed(e.seed, stream::noise, ur, ut));
          rows[static_cast<std::size_t>(r * nt + (t - t_min))] = {r, t, rep.decision.p_value, rep.decision.statistic,
                                                                  rep.decision.df};
        }
      },
      e.threads);
  return rows;
}

struct PowerRow {
  int setting = 1;
  Eigen::Index n = 0;
  int t = 0;
  double noise_scale = 0.0;
  double reject_rate = 0.0;
};

/// Rejection rates over replications for every (t, noise) pair; the same
/// datasets are reused across pairs.
inline std::vector<PowerRow> power_experiment(const ScreenExperiment& e, const std::vector<int>& ts,
                                              const std::vector<double>& noises) {
  const std::size_t cells = ts.size() * noises.size();
  std::vector<std::vector<char>> rejected(static_cast<std::size_t>(e.reps), std::vector<char>(cells, 0));
  parallel_for(
      e.reps,
      [&](int r) {
        const SimData sd = simulate_rep(e, r);
        for (std::size_t a = 0; a < ts.size(); ++a)
          for (std::size_t b = 0; b < noises.size(); ++b) {
            const auto ur = static_cast<std::uint64_t>(r);
            const auto sub = static_cast<std::uint64_t>(ts[a]) * 1000 + b;
            const ScreenReport rep = screen_once(e, sd, ts[a], noises[b], rep_seed(e.seed, stream::sketch, ur, sub),
                                                 rep_seed(e.seed, stream::noise, ur, sub));
            rejected[static_cast<std::size_t>(r)][a * noises.size() + b] = rep.decision.reject;
          }
      },
      e.threads);
  std::vector<PowerRow> out;
  for (std::size_t a = 0; a < ts.size(); ++a)
    for (std::size_t b = 0; b < noises.size(); ++b) {
      int k = 0;
      for (const auto& rr : rejected) k += rr[a * noises.size() + b];
      out.push_back({setting_number(e.setting), e.n, ts[a], noises[b], static_cast<double>(k) / e.reps});
    }
  return out;
}

struct RobustRow {
  std::string scenario;
  double noise_scale = 0.0;
  int t = 0;
  int matches = 0;
  int reps = 0;
};

/// Decision agreement across `n_u` projection draws that are fixed once and
/// reused on every replication.
inline RobustRow robust_u_experiment(const ScreenExperiment& e, int t, double noise_scale, int n_u) {
  require(n_u >= 1, Errc::InvalidArgument, "need at least one U");
  std::vector<char> agree(static_cast<std::size_t>(e.reps), 0);
  parallel_for(
      e.reps,
      [&](int r) {
        const SimData sd = simulate_rep(e, r);
        int rejects = 0;
        for (int u = 0; u < n_u; ++u) {
          const auto uu = static_cast<std::uint64_t>(u);
          const ScreenReport rep =
              screen_once(e, sd, t, noise_scale, rep_seed(e.seed, stream::sketch, 0, uu),
                          rep_seed(e.seed, stream::noise, static_cast<std::uint64_t>(r), uu));
          rejects += rep.decision.reject;
        }
        agree[static_cast<std::size_t>(r)] = rejects == 0 || rejects == n_u;
      },
      e.threads);
  RobustRow row;
  row.scenario = e.fam.name() + (e.hypothesis == Hypothesis::H0 ? " H0" : " H1");
  row.noise_scale = noise_scale;
  row.t = t;
  row.reps = e.reps;
  for (char a : agree) row.matches += a;
  return row;
}

// ---------------------------------------------------------------------------
// Training comparison

struct CompareConfig {
  Setting setting = Setting::S2;
  Eigen::Index n = 2000;
  double rho = 0.1;
  LossFamily fam = LossFamily::logistic();
  Eigen::Index eval_n = 100000;
  int aeal_rounds = 25;        // AE-AL rounds to record
  int baseline_rounds = 200;   // synchronization rounds for FedSGD / FedBCD
  std::vector<double> grid = default_step_grid();
  BaselineConfig baseline;     // step0, algorithm and max_rounds are overridden
  std::uint64_t seed = 1;
};

struct CompareRow {
  std::string method;
  int round = 0;  // transmissions so far
  double metric = 0.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  double oracle_metric = 0.0;
  double fedsgd_step = 0.0;
  double fedbcd_step = 0.0;
  std::size_t fedsgd_tuning_transmissions = 0;
  std::size_t fedbcd_tuning_transmissions = 0;
  std::vector<double> aeal_grad_log;
};

/// AUC for logistic models, otherwise the Euclidean distance of the pooled
/// coefficients to the oracle's.
struct Metric {
  const LossFamily& fam;
  const Matrix& eval_x;
  const Vector& eval_y;
  const Vector& oracle_beta;
  const std::vector<Owner>& own;

  double pooled(const VectorRef& beta) const {
    if (fam.kind() != FamilyKind::Logistic) return (beta - oracle_beta).norm();
    const Vector score = eval_x * beta;
    return auc(std::span<const double>(score.data(), static_cast<std::size_t>(score.size())),
               std::span<const double>(eval_y.data(), static_cast<std::size_t>(eval_y.size())));
  }
  double operator()(const VectorRef& beta_a, const VectorRef& beta_b) const {
    return pooled(map_T(beta_a, beta_b, own));
  }
};

struct CompareData {
  SimData sim;
  Matrix eval_x;
  Vector eval_y;
  EvalData eval;
  FitResult oracle;
};

inline CompareData compare_data(const CompareConfig& c) {
  Rng rng(rep_seed(c.seed, stream::data, 0));
  SimDesign d;
  d.setting = c.setting;
  d.n = c.n;
  d.rho = c.rho;
  d.fam = c.fam;
  d.hypothesis = Hypothesis::H1;
  CompareData cd{simulate(d, rng), {}, {}, {}, {}};
  const auto own = cd.sim.data.ownership();
  Rng erng(rep_seed(c.seed, stream::eval, 0));
  cd.eval_x = gen_covariates(c.eval_n, static_cast<int>(own.size()), c.rho, erng);
  cd.eval_y = gen_response(c.fam, cd.eval_x, cd.sim.beta, erng);
  cd.eval = {agent_columns(cd.eval_x, own, Agent::A), agent_columns(cd.eval_x, own, Agent::B), cd.eval_y};
  cd.oracle = oracle_fit(cd.sim.data.pooled_design(), cd.sim.data.y(), c.fam);
  return cd;
}

/// Metric against transmissions for AE-AL, the two tuned baselines and the
/// pooled oracle. AE-AL state k (A's k-th fit) costs 2k + 1 transmissions; a
/// baseline after k synchronizations costs 2k.
inline CompareResult train_compare(const CompareConfig& c) {
  const CompareData cd = compare_data(c);
  const auto own = cd.sim.data.ownership();
  const AgentView va = cd.sim.data.view(Agent::A);
  const AgentView vb = cd.sim.data.view(Agent::B);
  const Vector& y = cd.sim.data.y();
  const Metric metric{c.fam, cd.eval_x, cd.eval_y, cd.oracle.beta, own};

  CompareResult res;
  res.oracle_metric = metric.pooled(cd.oracle.beta);

  TrainConfig tc;
  tc.fam = c.fam;
  tc.stop.max_rounds = c.aeal_rounds;
  const TrainSession s = train(va.design, y, vb.design, tc);
  res.aeal_grad_log = s.grad_log;
  const Vector zb = Vector::Zero(vb.cols());
  for (std::size_t k = 0; k < s.history_a.size(); ++k)
    res.rows.push_back({"AE-AL", static_cast<int>(2 * k + 1), metric(s.history_a[k], k == 0 ? zb : s.history_b[k - 1])});

  int max_tx = static_cast<int>(2 * s.history_a.size() - 1);
  for (const auto algo : {BaselineAlgo::FedSGD, BaselineAlgo::FedBCD}) {
    BaselineConfig bc = c.baseline;
    bc.algorithm = algo;
    const TuneResult tr = tune_step(c.grid, bc, c.baseline_rounds, va.design, y, vb.design, c.fam, cd.eval);
    const bool sgd = algo == BaselineAlgo::FedSGD;
    (sgd ? res.fedsgd_step : res.fedbcd_step) = tr.best_step;
    (sgd ? res.fedsgd_tuning_transmissions : res.fedbcd_tuning_transmissions) = tr.total_transmissions;
    for (std::size_t k = 0; k < tr.best.history_a.size(); ++k)
      res.rows.push_back({sgd ? "FedSGD" : "FedBCD", static_cast<int>(2 * k),
                          metric(tr.best.history_a[k], tr.best.history_b[k])});
    max_tx = std::max(max_tx, static_cast<int>(2 * (tr.best.history_a.size() - 1)));
  }
  for (int r = 0; r <= max_tx; ++r) res.rows.push_back({"oracle", r, res.oracle_metric});
  return res;
}

/// First transmission count at which `method` comes within `tol` of the
/// oracle metric; empty if it never does.
inline std::optional<int> first_within(const CompareResult& r, const std::string& method, double tol) {
  for (const auto& row : r.rows)
    if (row.method == method && std::abs(row.metric - r.oracle_metric) <= tol) return row.round;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Prediction interval coverage

struct CoverageConfig {
  Setting setting = Setting::S1;
  Eigen::Index n = 2000;
  double rho = 0.0;
  LossFamily fam = LossFamily::gaussian();
  int reps = 500;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct CoverageResult {
  double coverage = 0.0;
  int covered = 0;
  int reps = 0;
  Vector beta;      // true coefficients, fixed across replications
  Vector x_point;   // fixed test point (pooled space)
  double max_grad = 0.0;  // largest block-gradient norm seen in any local update
};

/// Coefficients and test point are drawn once; each replication redraws the
/// data, trains, and checks whether the interval for nu covers x'beta.
inline CoverageResult coverage_experiment(const CoverageConfig& c) {
  CoverageResult res;
  res.reps = c.reps;
  Rng fixed(rep_seed(c.seed, stream::eval, 0));
  res.beta = setting_coefficients(c.setting, Hypothesis::H1, c.fam, fixed);
  const auto own = setting_ownership(c.setting);
  res.x_point = gen_covariates(1, static_cast<int>(own.size()), c.rho, fixed).row(0).transpose();
  const Matrix xp = res.x_point.transpose();
  const Vector pa = agent_columns(xp, own, Agent::A).row(0).transpose();
  const Vector pb = agent_columns(xp, own, Agent::B).row(0).transpose();
  const double truth = res.x_point.dot(res.beta);

  std::vector<char> hit(static_cast<std::size_t>(c.reps), 0);
  std::vector<double> grads(static_cast<std::size_t>(c.reps), 0.0);
  parallel_for(
      c.reps,
      [&](int r) {
        Rng rng(rep_seed(c.seed, stream::data, static_cast<std::uint64_t>(r)));
        SimDesign d;
        d.setting = c.setting;
        d.n = c.n;
        d.rho = c.rho;
        d.fam = c.fam;
        d.beta = res.beta;
        const SimData sd = simulate(d, rng);
        TrainConfig tc;
        tc.fam = c.fam;
        const TrainSession s = train(sd.data.view(Agent::A).design, sd.data.y(), sd.data.view(Agent::B).design, tc);
        const Prediction p = predict(s, pa, pb, c.alpha);
        hit[static_cast<std::size_t>(r)] = p.nu_lo <= truth && truth <= p.nu_hi;
        grads[static_cast<std::size_t>(r)] = *std::max_element(s.grad_log.begin(), s.grad_log.end());
      },
      c.threads);
  for (char h : hit) res.covered += h;
  res.coverage = static_cast<double>(res.covered) / c.reps;
  res.max_grad = *std::max_element(grads.begin(), grads.end());
  return res;
}

}  // namespace aeal
