#include "aeal/baselines.hpp"
#include "aeal/protocol.hpp"
#include "aeal/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace aeal;

namespace {

struct Views {
  Matrix xa;
  Matrix xb;
  Vector y;
  Matrix x;
};

Views setting_views(Setting s, Eigen::Index n, const LossFamily& fam, std::uint64_t seed) {
  Rng rng(seed);
  SimDesign d;
  d.setting = s;
  d.n = n;
  d.fam = fam;
  d.hypothesis = Hypothesis::H1;
  const SimData sd = simulate(d, rng);
  return {sd.data.view(Agent::A).design, sd.data.view(Agent::B).design, sd.data.y(), sd.data.pooled_design()};
}

}  // namespace

TEST(Baseline, ZeroStepNeverMoves) {
  const Views v = setting_views(Setting::S1, 200, LossFamily::logistic(), 1);
  for (auto algo : {BaselineAlgo::FedSGD, BaselineAlgo::FedBCD}) {
    BaselineConfig cfg;
    cfg.algorithm = algo;
    cfg.step0 = 0.0;
    cfg.max_rounds = 10;
    const TrainSession s = train_baseline(v.xa, v.y, v.xb, LossFamily::logistic(), cfg);
    EXPECT_TRUE(s.beta_a.isZero(0.0));
    EXPECT_TRUE(s.beta_b.isZero(0.0));
    ASSERT_EQ(s.loss_log.size(), 11u);
    for (double l : s.loss_log) {
      EXPECT_EQ(l, s.loss_log[0]);
      EXPECT_NEAR(l, std::log(2.0), 1e-13);
    }
  }
}

TEST(Baseline, SingleLocalStepFedBcdIsFedSgd) {
  const Views v = setting_views(Setting::S2, 300, LossFamily::logistic(), 2);
  BaselineConfig sgd;
  sgd.step0 = 0.8;
  sgd.max_rounds = 40;
  BaselineConfig bcd = sgd;
  bcd.algorithm = BaselineAlgo::FedBCD;
  bcd.local_steps = 1;
  bcd.mu = 0.0;
  const TrainSession a = train_baseline(v.xa, v.y, v.xb, LossFamily::logistic(), sgd);
  const TrainSession b = train_baseline(v.xa, v.y, v.xb, LossFamily::logistic(), bcd);
  ASSERT_EQ(a.history_a.size(), b.history_a.size());
  for (std::size_t k = 0; k < a.history_a.size(); ++k) {
    EXPECT_LE((a.history_a[k] - b.history_a[k]).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE((a.history_b[k] - b.history_b[k]).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Baseline, SharedGradientIsTheLossDerivative) {
  const Views v = setting_views(Setting::S1, 120, LossFamily::logistic(), 3);
  BaselineConfig cfg;
  cfg.step0 = 0.5;
  cfg.max_rounds = 6;
  cfg.batch = 40;
  cfg.batch_seed = 11;
  const LossFamily fam = LossFamily::logistic();
  const TrainSession s = train_baseline(v.xa, v.y, v.xb, fam, cfg);
  EXPECT_EQ(s.rounds_transmitted, 2u * 6u + 1u);

  int k = 0;
  std::vector<double> nu_b;
  for (const auto& e : s.transcript) {
    const Message m = decode(e.line);
    if (const auto* o = std::get_if<msg::Offset>(&m)) {
      nu_b = o->nu;
    } else if (const auto* g = std::get_if<msg::GradShare>(&m)) {
      ASSERT_EQ(g->round, k);
      const auto rows = batch_rows(120, cfg, k);
      ASSERT_EQ(g->grad.size(), rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int r = rows[i];
        // B's part checked independently from its coefficient history
        EXPECT_NEAR(nu_b[i], v.xb.row(r).dot(s.history_b[static_cast<std::size_t>(k)]), 1e-14);
        const double nu = v.xa.row(r).dot(s.history_a[static_cast<std::size_t>(k)]) + nu_b[i];
        EXPECT_NEAR(g->grad[i], fam.grad(v.y[r], nu), 1e-14);
      }
      ++k;
    }
  }
  EXPECT_EQ(k, 6);
}

TEST(Baseline, MiniBatchRows) {
  BaselineConfig cfg;
  cfg.batch = 7;
  cfg.batch_seed = 5;
  const auto r0 = batch_rows(30, cfg, 0);
  EXPECT_EQ(r0.size(), 7u);
  EXPECT_TRUE(std::is_sorted(r0.begin(), r0.end()));
  EXPECT_EQ(std::set<int>(r0.begin(), r0.end()).size(), 7u);
  EXPECT_EQ(batch_rows(30, cfg, 0), r0);
  EXPECT_NE(batch_rows(30, cfg, 1), r0);
  cfg.batch.reset();
  EXPECT_EQ(batch_rows(4, cfg, 3), (std::vector<int>{0, 1, 2, 3}));
  cfg.batch = 31;
  EXPECT_THROW(cfg.validate(30), Error);
}

TEST(Baseline, SmallConstantStepDescends) {
  const Views v = setting_views(Setting::S2, 400, LossFamily::gaussian(), 4);
  BaselineConfig cfg;
  cfg.decay = StepSchedule::Constant;
  cfg.step0 = 0.05;
  cfg.max_rounds = 60;
  const TrainSession s = train_baseline(v.xa, v.y, v.xb, LossFamily::gaussian(), cfg);
  for (std::size_t i = 1; i < s.loss_log.size(); ++i) EXPECT_LE(s.loss_log[i], s.loss_log[i - 1] + 1e-15);
}

TEST(Baseline, DivergenceKeepsBestIterate) {
  const Views v = setting_views(Setting::S1, 200, LossFamily::gaussian(), 5);
  BaselineConfig cfg;
  cfg.decay = StepSchedule::Constant;
  cfg.step0 = 50.0;
  cfg.max_rounds = 100;
  const TrainSession s = train_baseline(v.xa, v.y, v.xb, LossFamily::gaussian(), cfg);
  EXPECT_TRUE(s.diverged);
  EXPECT_EQ(s.stop_reason, StopReason::Diverged);
  EXPECT_LT(s.rounds, 100);
  const double kept = joint_loss(LossFamily::gaussian(), v.xa, v.xb, v.y, s.beta_a, s.beta_b);
  for (double l : s.loss_log) EXPECT_LE(kept, l);
}

TEST(Baseline, SlowerThanAeal) {
  const Views v = setting_views(Setting::S2, 500, LossFamily::gaussian(), 6);
  const LossFamily fam = LossFamily::gaussian();
  const FitResult oracle = oracle_fit(v.x, v.y, fam);
  BaselineConfig cfg;
  cfg.decay = StepSchedule::Constant;
  const TuneResult t = tune_step(default_step_grid(), cfg, 50, v.xa, v.y, v.xb, fam);
  const double base_gap = joint_loss(fam, v.xa, v.xb, v.y, t.best.beta_a, t.best.beta_b) - oracle.final_loss;

  TrainConfig tc;
  tc.fam = fam;
  tc.stop.offset_tol = 0.0;
  tc.stop.coef_tol = 0.0;
  tc.stop.max_rounds = 10;
  const TrainSession s = train(v.xa, v.y, v.xb, tc);
  const double aeal_gap = joint_loss(s, v.xa, v.xb, v.y) - oracle.final_loss;
  EXPECT_GT(base_gap, aeal_gap);
}

TEST(Tune, GridCases) {
  const Views v = setting_views(Setting::S1, 150, LossFamily::logistic(), 7);
  const LossFamily fam = LossFamily::logistic();
  BaselineConfig cfg;
  const TuneResult one = tune_step({0.3}, cfg, 5, v.xa, v.y, v.xb, fam);
  EXPECT_EQ(one.best_step, 0.3);
  EXPECT_EQ(one.losses.size(), 1u);
  EXPECT_EQ(one.total_transmissions, 11u);

  const TuneResult two = tune_step({0.0, 0.5}, cfg, 5, v.xa, v.y, v.xb, fam);
  EXPECT_EQ(two.best_step, 0.5);
  EXPECT_LT(two.losses[1], two.losses[0]);
  EXPECT_EQ(two.total_transmissions, 22u);

  EXPECT_THROW(tune_step({}, cfg, 5, v.xa, v.y, v.xb, fam), Error);
}

TEST(Tune, DefaultGridIsLogSpaced) {
  const auto g = default_step_grid();
  ASSERT_EQ(g.size(), 20u);
  EXPECT_NEAR(g.front(), 0.01, 1e-15);
  EXPECT_NEAR(g.back(), 5.0, 1e-12);
  const double ratio = std::pow(500.0, 1.0 / 19.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], ratio, 1e-12);
}
