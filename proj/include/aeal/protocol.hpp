#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/loss.hpp"
#include "aeal/privacy.hpp"
#include "aeal/rng.hpp"
#include "aeal/screening.hpp"
#include "aeal/solver.hpp"
#include "aeal/stats.hpp"
#include "aeal/transport.hpp"
#include "aeal/wire.hpp"

#include <cmath>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace aeal {

enum class StopReason { OffsetDelta, CoefDelta, MaxRounds, Diverged };

inline std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::OffsetDelta: return "OffsetDelta";
    case StopReason::CoefDelta: return "CoefDelta";
    case StopReason::MaxRounds: return "MaxRounds";
    case StopReason::Diverged: return "Diverged";
  }
  return "Unknown";
}

inline StopReason parse_stop_reason(std::string_view s) {
  for (auto r : {StopReason::OffsetDelta, StopReason::CoefDelta, StopReason::MaxRounds, StopReason::Diverged})
    if (stop_reason_name(r) == s) return r;
  fail(Errc::ProtocolError, "unknown stop reason '" + std::string(s) + "'");
}

/// Checked after each of A's updates (k >= 1), in the order OffsetDelta,
/// CoefDelta, MaxRounds; the first one satisfied wins.
struct StopCriterion {
  std::optional<double> offset_tol;  // on the combined predictor; default 1e-8 * sqrt(n); <= 0 disables
  double coef_tol = 1e-8;            // on A's coefficients; <= 0 disables
  int max_rounds = 200;

  double offset_tol_for(Eigen::Index n) const {
    return offset_tol ? *offset_tol : 1e-8 * std::sqrt(static_cast<double>(n));
  }
  void validate() const { require(max_rounds >= 0, Errc::InvalidArgument, "max_rounds must be >= 0"); }
};

struct TrainConfig {
  LossFamily fam = LossFamily::gaussian();
  SolverConfig solver;  // solver.ridge is the ridge lambda of both agents
  StopCriterion stop;
  std::optional<double> flip_prob;  // randomized response on a 0/1 response before sharing
  std::uint64_t mask_seed = 0;
};

/// One agent's record of a training session.
struct AgentTrace {
  Vector beta;
  Vector nu_own;
  Vector nu_other;
  std::vector<Vector> history;      // own coefficients after each own fit
  std::vector<double> grad_log;     // penalized block-gradient inf-norm after each own fit
  std::vector<int> solver_iterations;
  Matrix cov;                       // sandwich covariance at the final state; empty when singular
  int rounds = 0;
  std::optional<StopReason> stop_reason;
  std::optional<double> flip_prob;
  Eigen::Index n = 0;
};

struct Prediction {
  double nu = 0.0;
  double nu_lo = 0.0;
  double nu_hi = 0.0;
  double point = 0.0;  // response scale
  double lo = 0.0;
  double hi = 0.0;
  double sigma_a = 0.0;
  double sigma_b = 0.0;
};

namespace detail {

inline FitResult local_fit(const MatrixRef& x, const VectorRef& y, const VectorRef& offset, const LossFamily& fam,
                           const SolverConfig& cfg, const Vector& init) {
  FitResult f = fit_offset(x, y, offset, fam, cfg, init);
  require(f.converged, Errc::SolverFailure,
          "local fit did not converge (gradient " + std::to_string(f.grad_norm_inf) + " after " +
              std::to_string(f.iterations) + " iterations)");
  return f;
}

inline Matrix safe_covariance(const MatrixRef& x, const VectorRef& y, const VectorRef& offset, const LossFamily& fam,
                              const VectorRef& beta) {
  try {
    return sandwich_pieces(x, y, offset, fam, beta).covariance(Errc::SingularVariance);
  } catch (const Error& e) {
    if (e.code() == Errc::SingularVariance) return Matrix();
    throw;
  }
}

inline void check_length(const std::vector<double>& v, Eigen::Index n, std::string_view what) {
  if (static_cast<Eigen::Index>(v.size()) != n)
    fail(Errc::DimensionMismatch, std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                                      std::to_string(n));
}

}  // namespace detail

/// sigma^2 = x^T V x / n with V the sandwich covariance of one agent.
inline double prediction_sigma(const VectorRef& x, const Matrix& cov, Eigen::Index n) {
  require(cov.size() > 0, Errc::SingularVariance, "no variance estimate (V1 was singular)");
  require(x.size() == cov.rows(), Errc::DimensionMismatch, "covariate length differs from the coefficient count");
  const double q = x.dot(cov * x);
  return std::sqrt(std::max(q, 0.0) / static_cast<double>(n));
}

/// nu +- z_{1-alpha/4} (sigma_a + sigma_b), mapped through the inverse link;
/// with randomized response the probabilities are unmasked as well.
inline Prediction combine_prediction(double nu_a, double sigma_a, double nu_b, double sigma_b, const LossFamily& fam,
                                     double alpha, std::optional<double> flip_prob = std::nullopt) {
  require(alpha > 0.0 && alpha < 1.0, Errc::DomainError, "alpha must lie in (0,1)");
  Prediction p;
  p.nu = nu_a + nu_b;
  p.sigma_a = sigma_a;
  p.sigma_b = sigma_b;
  const double half = normal_quantile(1.0 - alpha / 4.0) * (sigma_a + sigma_b);
  p.nu_lo = p.nu - half;
  p.nu_hi = p.nu + half;
  const auto to_mean = [&](double v) {
    const double m = fam.predict_mean(v);
    return flip_prob ? unmask_probability(m, *flip_prob) : m;
  };
  p.point = to_mean(p.nu);
  p.lo = to_mean(p.nu_lo);
  p.hi = to_mean(p.nu_hi);
  return p;
}

/// A's half of stage 2. Shares the response, fits alone, then alternates
/// with B until a stop criterion fires; the last Offset carries final=true.
inline AgentTrace alice_train(Channel& ch, const MatrixRef& xa, const VectorRef& y, const TrainConfig& cfg) {
  cfg.stop.validate();
  cfg.solver.validate();
  const Eigen::Index n = xa.rows();
  require(y.size() == n, Errc::DimensionMismatch, "response length differs from A's design");
  cfg.fam.check_response(y);

  AgentTrace tr;
  tr.n = n;
  Vector y_used = y;
  if (cfg.flip_prob) {
    require(cfg.fam.kind() == FamilyKind::Logistic, Errc::InvalidArgument, "randomized response needs a logistic model");
    Rng rng(cfg.mask_seed);
    y_used = mask_response(y, *cfg.flip_prob, rng).y_prime;
    tr.flip_prob = cfg.flip_prob;
  }
  ch.send(msg::ResponseShare{to_std(y_used), cfg.flip_prob});

  const Vector zero = Vector::Zero(n);
  FitResult f = detail::local_fit(xa, y_used, zero, cfg.fam, cfg.solver, Vector::Zero(xa.cols()));
  tr.beta = f.beta;
  tr.nu_own = xa * tr.beta;
  tr.nu_other = zero;
  tr.history.push_back(tr.beta);
  tr.grad_log.push_back(f.grad_norm_inf);
  tr.solver_iterations.push_back(f.iterations);

  const double offset_tol = cfg.stop.offset_tol_for(n);
  if (cfg.stop.max_rounds == 0) {
    tr.stop_reason = StopReason::MaxRounds;
    ch.send(msg::Offset{0, to_std(tr.nu_own), true});
  } else {
    ch.send(msg::Offset{0, to_std(tr.nu_own), false});
    for (int k = 1;; ++k) {
      const msg::Offset off = ch.expect<msg::Offset>();
      require(off.round == k, Errc::ProtocolError,
              "expected offset round " + std::to_string(k) + ", got " + std::to_string(off.round));
      require(!off.final, Errc::ProtocolError, "B may not end training");
      detail::check_length(off.nu, n, "B's offset");
      const Vector nu_b = from_std(off.nu);

      f = detail::local_fit(xa, y_used, nu_b, cfg.fam, cfg.solver, tr.beta);
      const Vector nu_a = xa * f.beta;
      const double offset_delta = ((nu_a + nu_b) - (tr.nu_own + tr.nu_other)).norm();
      const double coef_delta = (f.beta - tr.beta).norm();
      tr.beta = f.beta;
      tr.nu_own = nu_a;
      tr.nu_other = nu_b;
      tr.rounds = k;
      tr.history.push_back(tr.beta);
      tr.grad_log.push_back(f.grad_norm_inf);
      tr.solver_iterations.push_back(f.iterations);

      if (offset_tol > 0.0 && offset_delta <= offset_tol) {
        tr.stop_reason = StopReason::OffsetDelta;
      } else if (cfg.stop.coef_tol > 0.0 && coef_delta <= cfg.stop.coef_tol) {
        tr.stop_reason = StopReason::CoefDelta;
      } else if (k >= cfg.stop.max_rounds) {
        tr.stop_reason = StopReason::MaxRounds;
      }
      ch.send(msg::Offset{k, to_std(tr.nu_own), tr.stop_reason.has_value()});
      if (tr.stop_reason) break;
    }
  }
  tr.cov = detail::safe_covariance(xa, y_used, tr.nu_other, cfg.fam, tr.beta);
  return tr;
}

/// B's half of stage 2: refits against every non-final offset from A.
inline AgentTrace bob_train(Channel& ch, const MatrixRef& xb, const LossFamily& fam, const SolverConfig& solver) {
  solver.validate();
  const Eigen::Index n = xb.rows();
  const msg::ResponseShare rs = ch.expect<msg::ResponseShare>();
  detail::check_length(rs.y, n, "shared response");
  const Vector y = from_std(rs.y);
  fam.check_response(y);
  if (rs.flip_prob) check_flip_prob(*rs.flip_prob);

  AgentTrace tr;
  tr.n = n;
  tr.flip_prob = rs.flip_prob;
  tr.beta = Vector::Zero(xb.cols());
  tr.nu_own = Vector::Zero(n);
  int expected = 0;
  for (;;) {
    const msg::Offset off = ch.expect<msg::Offset>();
    require(off.round == expected, Errc::ProtocolError,
            "expected offset round " + std::to_string(expected) + ", got " + std::to_string(off.round));
    detail::check_length(off.nu, n, "A's offset");
    tr.nu_other = from_std(off.nu);
    if (off.final) break;
    const FitResult f = detail::local_fit(xb, y, tr.nu_other, fam, solver, tr.beta);
    tr.beta = f.beta;
    tr.nu_own = xb * tr.beta;
    tr.rounds = off.round + 1;
    tr.history.push_back(tr.beta);
    tr.grad_log.push_back(f.grad_norm_inf);
    tr.solver_iterations.push_back(f.iterations);
    ch.send(msg::Offset{tr.rounds, to_std(tr.nu_own), false});
    expected = tr.rounds;
  }
  tr.cov = detail::safe_covariance(xb, y, tr.nu_other, fam, tr.beta);
  return tr;
}

// ---------------------------------------------------------------------------
// Sessions: handshake plus one of the modes "screen", "train", "predict".

struct AliceInputs {
  Matrix x;
  Vector y;
  std::vector<std::string> ids;  // empty: rows are aligned by position
  Matrix predict_x;              // A's covariates of the points to predict
  std::vector<std::string> predict_ids;
};

struct AliceOptions {
  std::string mode = "train";
  TrainConfig train;
  std::optional<int> t;  // sketch width; B picks min(3, p_B) when absent
  ScreenTest test = ScreenTest::Wald;
  ScreenOptions screen;
  double alpha = 0.05;  // prediction interval level
  std::string version{kProtocolVersion};
};

struct AliceOutcome {
  std::vector<int> rows;  // A's rows used, in session order
  std::vector<std::string> ids;
  std::optional<ScreenReport> screen;
  std::optional<AgentTrace> train;
  std::vector<Prediction> predictions;
  Transcript transcript;
  std::size_t bytes = 0;
  std::size_t offsets = 0;
};

struct BobInputs {
  Matrix x;
  std::vector<std::string> ids;
  Matrix predict_x;
  std::vector<std::string> predict_ids;  // empty: positional ("0", "1", ...)
};

struct BobOptions {
  SketchOptions sketch;  // t comes from A's Hello
  std::optional<LossFamily> family;  // when set, a different family in Hello is refused
  SolverConfig solver;  // ridge comes from A's Hello
  std::string version{kProtocolVersion};
};

struct BobOutcome {
  std::string mode;
  LossFamily fam = LossFamily::gaussian();
  double lambda = 0.0;
  std::vector<int> rows;
  std::optional<SketchPackage> sketch;
  std::optional<msg::ScreenResult> screen;
  std::optional<AgentTrace> train;
  std::string stop_reason;
  Transcript transcript;
  std::size_t bytes = 0;
};

namespace detail {

inline std::vector<int> iota_rows(Eigen::Index n) {
  std::vector<int> r(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<int>(i);
  return r;
}

template <typename F>
auto guarded(Channel& ch, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    if (!(e.code() == Errc::ProtocolError && std::string_view(e.what()).find("peer aborted") != std::string_view::npos))
      ch.abort(e.what());
    throw;
  } catch (const std::exception& e) {
    ch.abort(e.what());
    throw;
  }
}

}  // namespace detail

inline AliceOutcome run_alice(Channel& ch, const AliceInputs& in, const AliceOptions& opt) {
  return detail::guarded(ch, [&] {
    require(opt.mode == "screen" || opt.mode == "train" || opt.mode == "predict", Errc::InvalidArgument,
            "unknown mode '" + opt.mode + "'");
    AliceOutcome out;
    msg::Hello hello{opt.version, in.x.rows(), opt.train.fam.name(), opt.train.solver.ridge, opt.mode, {}, {}};
    if (opt.mode == "screen") hello.t = opt.t;
    if (!in.ids.empty()) {
      require(static_cast<Eigen::Index>(in.ids.size()) == in.x.rows(), Errc::DimensionMismatch, "id count differs from rows");
      hello.ids = in.ids;
    }
    ch.send(hello);
    const msg::HelloAck ack = ch.expect<msg::HelloAck>();
    require(ack.version == opt.version, Errc::ProtocolError,
            "protocol version mismatch: ours " + opt.version + ", peer " + ack.version);

    if (hello.ids) {
      require(ack.ids.has_value(), Errc::ProtocolError, "peer did not return the common ids");
      std::unordered_map<std::string, int> pos;
      for (std::size_t i = 0; i < in.ids.size(); ++i) pos.emplace(in.ids[i], static_cast<int>(i));
      for (const auto& id : *ack.ids) {
        const auto it = pos.find(id);
        require(it != pos.end(), Errc::ProtocolError, "peer returned unknown id '" + id + "'");
        out.rows.push_back(it->second);
      }
      out.ids = *ack.ids;
    } else {
      out.rows = detail::iota_rows(in.x.rows());
    }
    require(ack.n == static_cast<std::int64_t>(out.rows.size()), Errc::ProtocolError, "row count mismatch in handshake");
    require(!out.rows.empty(), Errc::EmptyIntersection, "no common rows");
    const Matrix xa = select_rows(in.x, out.rows);
    const Vector y = select_rows(in.y, out.rows);

    std::string reason = "done";
    if (opt.mode == "screen") {
      const msg::SketchOffer offer = ch.expect<msg::SketchOffer>();
      SketchPackage pkg;
      pkg.projected = offer_matrix(offer);
      pkg.t = offer.t;
      pkg.noised = offer.noised;
      pkg.epsilon = offer.epsilon;
      pkg.clip_bound = offer.clip_bound;
      pkg.noise_scale = offer.noise_scale;
      pkg.rows_excluded = offer.rows_excluded;
      out.screen = screen_package(opt.test, xa, y, pkg, opt.train.fam, opt.screen);
      const auto& d = out.screen->decision;
      ch.send(msg::ScreenResult{d.statistic, d.df, d.p_value, d.reject, d.alpha});
      reason = "screened";
    } else {
      out.train = alice_train(ch, xa, y, opt.train);
      reason = std::string(stop_reason_name(*out.train->stop_reason));
      if (opt.mode == "predict") {
        const auto m = in.predict_x.rows();
        require(in.predict_x.cols() == xa.cols(), Errc::DimensionMismatch, "prediction covariates have wrong width");
        std::vector<std::string> ids = in.predict_ids;
        if (ids.empty())
          for (Eigen::Index i = 0; i < m; ++i) ids.push_back(std::to_string(i));
        require(static_cast<Eigen::Index>(ids.size()) == m, Errc::DimensionMismatch, "prediction id count differs");
        ch.send(msg::PredictRequest{ids});
        const auto pc = ch.expect<msg::PredictContribution>();
        detail::check_length(pc.nu, m, "B's prediction contribution");
        detail::check_length(pc.sigma, m, "B's prediction sigmas");
        for (Eigen::Index i = 0; i < m; ++i) {
          const Vector xi = in.predict_x.row(i).transpose();
          out.predictions.push_back(combine_prediction(xi.dot(out.train->beta),
                                                       prediction_sigma(xi, out.train->cov, out.train->n), pc.nu[i],
                                                       pc.sigma[i], opt.train.fam, opt.alpha, out.train->flip_prob));
        }
      }
    }
    ch.send(msg::Stop{reason});
    out.transcript = ch.transcript();
    out.bytes = ch.bytes_total();
    out.offsets = ch.offsets_seen();
    return out;
  });
}

inline BobOutcome run_bob(Channel& ch, const BobInputs& in, const BobOptions& opt) {
  return detail::guarded(ch, [&] {
    BobOutcome out;
    const msg::Hello hello = ch.expect<msg::Hello>();
    require(hello.version == opt.version, Errc::ProtocolError,
            "protocol version mismatch: ours " + opt.version + ", peer " + hello.version);
    try {
      out.fam = LossFamily::parse(hello.family);
    } catch (const Error& e) {
      fail(Errc::ProtocolError, std::string("bad family in handshake: ") + e.what());
    }
    require(!opt.family || *opt.family == out.fam, Errc::ProtocolError,
            "family mismatch: ours " + (opt.family ? opt.family->name() : std::string()) + ", peer " + hello.family);
    require(hello.lambda >= 0.0, Errc::ProtocolError, "negative ridge lambda in handshake");
    out.lambda = hello.lambda;
    out.mode = hello.mode;
    require(out.mode == "screen" || out.mode == "train" || out.mode == "predict", Errc::ProtocolError,
            "unknown mode '" + out.mode + "'");

    msg::HelloAck ack{opt.version, 0, {}};
    if (hello.ids) {
      require(!in.ids.empty(), Errc::ProtocolError, "peer aligns by id but this agent has no ids");
      std::unordered_map<std::string, int> pos;
      for (std::size_t i = 0; i < in.ids.size(); ++i) pos.emplace(in.ids[i], static_cast<int>(i));
      std::vector<std::string> common;
      for (const auto& id : *hello.ids)
        if (auto it = pos.find(id); it != pos.end()) {
          common.push_back(id);
          out.rows.push_back(it->second);
        }
      require(!common.empty(), Errc::EmptyIntersection, "no common ids");
      ack.ids = std::move(common);
    } else {
      require(hello.n == in.x.rows(), Errc::ProtocolError,
              "row count mismatch: peer has " + std::to_string(hello.n) + ", this agent " + std::to_string(in.x.rows()));
      out.rows = detail::iota_rows(in.x.rows());
    }
    ack.n = static_cast<std::int64_t>(out.rows.size());
    ch.send(ack);
    const Matrix xb = select_rows(in.x, out.rows);

    if (out.mode == "screen") {
      SketchOptions so = opt.sketch;
      so.t = hello.t.value_or(static_cast<int>(std::min<Eigen::Index>(3, xb.cols())));
      out.sketch = make_sketch(xb, so);
      const auto& p = *out.sketch;
      ch.send(to_offer(p.projected, p.t, p.noised, p.epsilon, p.clip_bound, p.noise_scale, p.rows_excluded));
      out.screen = ch.expect<msg::ScreenResult>();
    } else {
      SolverConfig solver = opt.solver;
      solver.ridge = out.lambda;
      out.train = bob_train(ch, xb, out.fam, solver);
      if (out.mode == "predict") {
        const auto req = ch.expect<msg::PredictRequest>();
        std::unordered_map<std::string, int> pos;
        for (Eigen::Index i = 0; i < in.predict_x.rows(); ++i)
          pos.emplace(in.predict_ids.empty() ? std::to_string(i) : in.predict_ids[static_cast<std::size_t>(i)],
                      static_cast<int>(i));
        msg::PredictContribution pc;
        for (const auto& id : req.ids) {
          const auto it = pos.find(id);
          require(it != pos.end(), Errc::ProtocolError, "no prediction row for id '" + id + "'");
          const Vector xi = in.predict_x.row(it->second).transpose();
          require(xi.size() == out.train->beta.size(), Errc::DimensionMismatch, "prediction covariates have wrong width");
          pc.nu.push_back(xi.dot(out.train->beta));
          pc.sigma.push_back(prediction_sigma(xi, out.train->cov, out.train->n));
        }
        ch.send(pc);
      }
    }
    out.stop_reason = ch.expect<msg::Stop>().reason;
    out.transcript = ch.transcript();
    out.bytes = ch.bytes_total();
    return out;
  });
}

/// Runs both agents in this process, B on its own thread, over an in-memory
/// channel. Rethrows the error of whichever side failed first.
inline std::pair<AliceOutcome, BobOutcome> run_in_process(const AliceInputs& ain, const AliceOptions& aopt,
                                                          const BobInputs& bin, const BobOptions& bopt) {
  auto [ca, cb] = memory_pair();
  BobOutcome bob;
  std::exception_ptr bob_err;
  std::thread tb([&, chan = cb.get()] {
    try {
      bob = run_bob(*chan, bin, bopt);
    } catch (...) {
      bob_err = std::current_exception();
      chan->close();
    }
  });
  AliceOutcome alice;
  std::exception_ptr alice_err;
  try {
    alice = run_alice(*ca, ain, aopt);
  } catch (...) {
    alice_err = std::current_exception();
    ca->close();
  }
  tb.join();
  if (alice_err && bob_err) {
    // the side whose failure is not a reaction to the other's is the cause
    try {
      std::rethrow_exception(alice_err);
    } catch (const Error& e) {
      const std::string_view w = e.what();
      if (e.code() == Errc::TransportFailure || w.find("peer aborted") != std::string_view::npos)
        std::rethrow_exception(bob_err);
      throw;
    }
  }
  if (alice_err) std::rethrow_exception(alice_err);
  if (bob_err) std::rethrow_exception(bob_err);
  return {std::move(alice), std::move(bob)};
}

// ---------------------------------------------------------------------------
// Joint view of a session, available when both agents ran in this process.

struct TrainSession {
  LossFamily fam = LossFamily::gaussian();
  Eigen::Index n = 0;
  double ridge = 0.0;
  Vector beta_a;
  Vector beta_b;
  Vector nu_a;
  Vector nu_b;
  int rounds = 0;
  StopReason stop_reason = StopReason::MaxRounds;
  std::vector<double> loss_log;  // joint penalized loss after each half-round (A's initial fit first)
  std::vector<double> grad_log;  // updating agent's block-gradient inf-norm, same indexing
  std::vector<Vector> history_a;
  std::vector<Vector> history_b;
  std::size_t rounds_transmitted = 0;  // Offset messages
  std::size_t bytes_transmitted = 0;
  Matrix cov_a;
  Matrix cov_b;
  std::optional<double> flip_prob;
  Vector y_used;  // the response both agents fitted (masked when flip_prob is set)
  Transcript transcript;  // as seen from A's endpoint
  bool diverged = false;
};

/// (1/n) sum m(y, nu_a + nu_b) + lambda (|beta_a|^2 + |beta_b|^2)
inline double joint_loss(const LossFamily& fam, const MatrixRef& xa, const MatrixRef& xb, const VectorRef& y,
                         const VectorRef& beta_a, const VectorRef& beta_b, double ridge = 0.0) {
  const Vector nu = xa * beta_a + xb * beta_b;
  return mean_loss(fam, y, nu) + ridge * (beta_a.squaredNorm() + beta_b.squaredNorm());
}

inline double joint_loss(const TrainSession& s, const MatrixRef& xa, const MatrixRef& xb, const VectorRef& y) {
  return joint_loss(s.fam, xa, xb, y, s.beta_a, s.beta_b, s.ridge);
}

/// Stage 2 between two in-process agents.
inline TrainSession train(const MatrixRef& xa, const VectorRef& y, const MatrixRef& xb, const TrainConfig& cfg) {
  require(xa.rows() == xb.rows(), Errc::DimensionMismatch, "agents hold different row counts");
  AliceInputs ain{xa, y, {}, {}, {}};
  AliceOptions aopt;
  aopt.mode = "train";
  aopt.train = cfg;
  BobInputs bin{xb, {}, {}, {}};
  BobOptions bopt;
  bopt.solver = cfg.solver;
  const auto [alice, bob] = run_in_process(ain, aopt, bin, bopt);
  const AgentTrace& a = *alice.train;
  const AgentTrace& b = *bob.train;

  TrainSession s;
  s.fam = cfg.fam;
  s.n = xa.rows();
  s.ridge = cfg.solver.ridge;
  s.beta_a = a.beta;
  s.beta_b = b.beta;
  s.nu_a = a.nu_own;
  s.nu_b = b.nu_own;
  s.rounds = a.rounds;
  s.stop_reason = *a.stop_reason;
  s.history_a = a.history;
  s.history_b = b.history;
  s.rounds_transmitted = alice.offsets;
  s.bytes_transmitted = alice.bytes;
  s.cov_a = a.cov;
  s.cov_b = b.cov;
  s.flip_prob = a.flip_prob;
  s.transcript = alice.transcript;

  s.y_used = y;
  if (cfg.flip_prob) {
    Rng rng(cfg.mask_seed);
    s.y_used = mask_response(y, *cfg.flip_prob, rng).y_prime;
  }
  // half-rounds: A0, B1, A1, B2, A2, ...
  const Vector zero_b = Vector::Zero(xb.cols());
  s.loss_log.push_back(joint_loss(cfg.fam, xa, xb, s.y_used, a.history[0], zero_b, s.ridge));
  s.grad_log.push_back(a.grad_log[0]);
  for (std::size_t k = 1; k < a.history.size(); ++k) {
    s.loss_log.push_back(joint_loss(cfg.fam, xa, xb, s.y_used, a.history[k - 1], b.history[k - 1], s.ridge));
    s.grad_log.push_back(b.grad_log[k - 1]);
    s.loss_log.push_back(joint_loss(cfg.fam, xa, xb, s.y_used, a.history[k], b.history[k - 1], s.ridge));
    s.grad_log.push_back(a.grad_log[k]);
  }
  return s;
}

inline Prediction predict(const TrainSession& s, const VectorRef& x_a, const VectorRef& x_b, double alpha = 0.05) {
  require(x_a.size() == s.beta_a.size() && x_b.size() == s.beta_b.size(), Errc::DimensionMismatch,
          "prediction covariates have wrong length");
  return combine_prediction(x_a.dot(s.beta_a), prediction_sigma(x_a, s.cov_a, s.n), x_b.dot(s.beta_b),
                            prediction_sigma(x_b, s.cov_b, s.n), s.fam, alpha, s.flip_prob);
}

}  // namespace aeal
