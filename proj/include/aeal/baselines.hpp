#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/loss.hpp"
#include "aeal/protocol.hpp"
#include "aeal/rng.hpp"
#include "aeal/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace aeal {

enum class BaselineAlgo { FedSGD, FedBCD };
enum class StepSchedule { Constant, InvSqrt };

struct BaselineConfig {
  BaselineAlgo algorithm = BaselineAlgo::FedSGD;
  double step0 = 0.1;
  StepSchedule decay = StepSchedule::InvSqrt;  // step0 / sqrt(1 + k)
  std::optional<int> batch;                   // mini-batch size; empty means the full data
  int local_steps = 5;                        // Q, FedBCD only
  double mu = 0.1;                            // proximal weight, FedBCD only
  int max_rounds = 100;
  double ridge = 0.0;
  std::uint64_t batch_seed = 0;  // agreed by both agents

  void validate(Eigen::Index n) const {
    require(step0 >= 0.0 && std::isfinite(step0), Errc::InvalidArgument, "step0 must be nonnegative");
    require(!batch || (*batch >= 1 && *batch <= n), Errc::InvalidArgument, "batch must lie in [1, n]");
    require(local_steps >= 1, Errc::InvalidArgument, "Q must be >= 1");
    require(mu >= 0.0, Errc::InvalidArgument, "mu must be nonnegative");
    require(max_rounds >= 0, Errc::InvalidArgument, "max_rounds must be >= 0");
    require(ridge >= 0.0, Errc::InvalidArgument, "ridge must be nonnegative");
  }

  double step(int k) const {
    return decay == StepSchedule::Constant ? step0 : step0 / std::sqrt(1.0 + static_cast<double>(k));
  }
  int q() const { return algorithm == BaselineAlgo::FedBCD ? local_steps : 1; }
  double prox() const { return algorithm == BaselineAlgo::FedBCD ? mu : 0.0; }
};

/// Rows used in round k; both agents derive the same set from the shared seed.
inline std::vector<int> batch_rows(Eigen::Index n, const BaselineConfig& cfg, int k) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  if (!cfg.batch || *cfg.batch == n) return rows;
  Rng rng = make_rng(cfg.batch_seed, static_cast<std::uint64_t>(k));
  const auto m = static_cast<std::size_t>(*cfg.batch);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(m);
  std::sort(rows.begin(), rows.end());
  return rows;
}

struct BaselineTrace {
  Vector beta;
  std::vector<Vector> history;  // coefficients after each round, starting with the zero start
  bool diverged = false;
  int rounds = 0;
};

/// Label holder. Per round: receives B's batch predictor, replies with the
/// per-row loss derivative, takes its own (local) steps.
inline BaselineTrace alice_baseline(Channel& ch, const MatrixRef& xa, const VectorRef& y, const LossFamily& fam,
                                    const BaselineConfig& cfg) {
  cfg.validate(xa.rows());
  fam.check_response(y);
  BaselineTrace tr;
  tr.beta = Vector::Zero(xa.cols());
  tr.history.push_back(tr.beta);
  double initial = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0;; ++k) {
    const msg::Offset off = ch.expect<msg::Offset>();
    require(off.round == k, Errc::ProtocolError, "baseline round out of order");
    const auto rows = batch_rows(xa.rows(), cfg, k);
    detail::check_length(off.nu, static_cast<Eigen::Index>(rows.size()), "B's batch predictor");
    const Vector nu_b = from_std(off.nu);
    const Matrix xs = select_rows(xa, rows);
    const Vector ys = select_rows(y, rows);
    const Vector nu = xs * tr.beta + nu_b;
    const double loss = mean_loss(fam, ys, nu);
    if (k == 0) initial = loss;
    if (!std::isfinite(loss) || !tr.beta.allFinite() || loss > 10.0 * std::max(initial, 1e-300)) {
      tr.diverged = true;
      ch.send(msg::Stop{std::string(stop_reason_name(StopReason::Diverged))});
      break;
    }
    if (k >= cfg.max_rounds) {
      ch.send(msg::Stop{std::string(stop_reason_name(StopReason::MaxRounds))});
      break;
    }
    Vector g(ys.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = fam.grad(ys[i], nu[i]);
    ch.send(msg::GradShare{k, to_std(g)});

    const double eta = cfg.step(k);
    const double m = static_cast<double>(rows.size());
    const Vector sync = tr.beta;
    for (int q = 0; q < cfg.q(); ++q) {
      if (q > 0) {
        // the label holder refreshes its own part; B's part stays stale
        const Vector nq = xs * tr.beta + nu_b;
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = fam.grad(ys[i], nq[i]);
      }
      const Vector grad = xs.transpose() * g / m + 2.0 * cfg.prox() * (tr.beta - sync) + 2.0 * cfg.ridge * tr.beta;
      tr.beta -= eta * grad;
    }
    tr.rounds = k + 1;
    tr.history.push_back(tr.beta);
  }
  return tr;
}

/// Passive party: sends its batch predictor, updates with the returned
/// derivative vector (held fixed over its Q local steps).
inline BaselineTrace bob_baseline(Channel& ch, const MatrixRef& xb, const BaselineConfig& cfg) {
  cfg.validate(xb.rows());
  BaselineTrace tr;
  tr.beta = Vector::Zero(xb.cols());
  tr.history.push_back(tr.beta);
  for (int k = 0;; ++k) {
    const auto rows = batch_rows(xb.rows(), cfg, k);
    const Matrix xs = select_rows(xb, rows);
    ch.send(msg::Offset{k, to_std(Vector(xs * tr.beta)), false});
    const Message reply = ch.recv();
    if (const auto* stop = std::get_if<msg::Stop>(&reply)) {
      tr.diverged = stop->reason == stop_reason_name(StopReason::Diverged);
      break;
    }
    const auto* gs = std::get_if<msg::GradShare>(&reply);
    require(gs != nullptr, Errc::ProtocolError, "expected GradShare or Stop");
    require(gs->round == k, Errc::ProtocolError, "gradient round out of order");
    detail::check_length(gs->grad, static_cast<Eigen::Index>(rows.size()), "A's gradient vector");
    const Vector base = xs.transpose() * from_std(gs->grad) / static_cast<double>(rows.size());
    const double eta = cfg.step(k);
    const Vector sync = tr.beta;
    for (int q = 0; q < cfg.q(); ++q)
      tr.beta -= eta * (base + 2.0 * cfg.prox() * (tr.beta - sync) + 2.0 * cfg.ridge * tr.beta);
    tr.rounds = k + 1;
    tr.history.push_back(tr.beta);
  }
  return tr;
}

inline std::size_t count_vector_sends(const Transcript& t) {
  std::size_t c = 0;
  for (const auto& e : t)
    if (e.line.starts_with("{\"type\":\"Offset\"") || e.line.starts_with("{\"type\":\"GradShare\"")) ++c;
  return c;
}

/// In-process baseline run. On divergence the best iterate (lowest joint
/// training loss) is returned and `diverged` is set.
inline TrainSession train_baseline(const MatrixRef& xa, const VectorRef& y, const MatrixRef& xb, const LossFamily& fam,
                                   const BaselineConfig& cfg) {
  require(xa.rows() == xb.rows(), Errc::DimensionMismatch, "agents hold different row counts");
  auto [ca, cb] = memory_pair();
  BaselineTrace bt;
  std::exception_ptr bob_err;
  std::thread tb([&, chan = cb.get()] {
    try {
      bt = detail::guarded(*chan, [&] { return bob_baseline(*chan, xb, cfg); });
    } catch (...) {
      bob_err = std::current_exception();
      chan->close();
    }
  });
  BaselineTrace at;
  std::exception_ptr alice_err;
  try {
    at = detail::guarded(*ca, [&] { return alice_baseline(*ca, xa, y, fam, cfg); });
  } catch (...) {
    alice_err = std::current_exception();
    ca->close();
  }
  tb.join();
  if (bob_err) std::rethrow_exception(bob_err);
  if (alice_err) std::rethrow_exception(alice_err);

  TrainSession s;
  s.fam = fam;
  s.n = xa.rows();
  s.ridge = cfg.ridge;
  s.history_a = at.history;
  s.history_b = bt.history;
  s.rounds = at.rounds;
  s.diverged = at.diverged;
  s.stop_reason = at.diverged ? StopReason::Diverged : StopReason::MaxRounds;
  s.transcript = ca->transcript();
  s.rounds_transmitted = count_vector_sends(s.transcript);
  s.bytes_transmitted = ca->bytes_total();
  s.y_used = y;

  std::size_t best = 0;
  for (std::size_t k = 0; k < at.history.size(); ++k) {
    const double l = joint_loss(fam, xa, xb, y, at.history[k], bt.history[k], cfg.ridge);
    s.loss_log.push_back(l);
    if (std::isfinite(l) && (!std::isfinite(s.loss_log[best]) || l < s.loss_log[best])) best = k;
  }
  const std::size_t pick = at.diverged ? best : at.history.size() - 1;
  s.beta_a = at.history[pick];
  s.beta_b = bt.history[pick];
  s.nu_a = xa * s.beta_a;
  s.nu_b = xb * s.beta_b;
  return s;
}

/// 20 candidates equally spaced on a log scale over [0.01, 5].
inline std::vector<double> default_step_grid(int count = 20, double lo = 0.01, double hi = 5.0) {
  require(count >= 1 && lo > 0.0 && hi >= lo, Errc::InvalidArgument, "bad step grid");
  std::vector<double> g;
  for (int i = 0; i < count; ++i)
    g.push_back(count == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1)));
  return g;
}

struct EvalData {
  Matrix xa;
  Matrix xb;
  Vector y;
};

struct TuneResult {
  double best_step = 0.0;
  double eval_loss = 0.0;
  std::vector<double> losses;  // per candidate
  std::size_t total_transmissions = 0;
  TrainSession best;
};

/// Runs the baseline for every candidate step over `budget_rounds` and keeps
/// the one with the lowest evaluation loss (training data when `eval` is
/// empty). Ties keep the earlier candidate.
inline TuneResult tune_step(const std::vector<double>& grid, BaselineConfig inner, int budget_rounds, const MatrixRef& xa,
                            const VectorRef& y, const MatrixRef& xb, const LossFamily& fam,
                            const std::optional<EvalData>& eval = std::nullopt) {
  require(!grid.empty(), Errc::InvalidArgument, "empty step grid");
  inner.max_rounds = budget_rounds;
  TuneResult res;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    inner.step0 = grid[i];
    TrainSession s = train_baseline(xa, y, xb, fam, inner);
    const double l = eval ? joint_loss(fam, eval->xa, eval->xb, eval->y, s.beta_a, s.beta_b)
                          : joint_loss(fam, xa, xb, y, s.beta_a, s.beta_b);
    res.losses.push_back(l);
    res.total_transmissions += s.rounds_transmitted;
    if (i == 0 || (std::isfinite(l) && l < best)) {
      best = std::isfinite(l) ? l : best;
      res.best_step = grid[i];
      res.eval_loss = l;
      res.best = std::move(s);
    }
  }
  return res;
}

}  // namespace aeal
