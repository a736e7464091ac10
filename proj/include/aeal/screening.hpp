#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/loss.hpp"
#include "aeal/privacy.hpp"
#include "aeal/solver.hpp"
#include "aeal/stats.hpp"

#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace aeal {

enum class ScreenTest { Wald, Lrt };

struct ScreenOptions {
  double alpha = 0.05;
  double ridge = 0.0;  // Wald only; the LRT always fits unpenalized
  // Drop sketch columns that are exact combinations of X_A and earlier sketch
  // columns (this happens without noise when t exceeds B's private rank) and
  // reduce the degrees of freedom accordingly, instead of failing.
  bool drop_dependent = false;
  std::optional<int> p_b;  // enables the t >= p_B warning of the LRT
  SolverConfig solver;
};

struct ScreenReport {
  TestDecision decision;
  Vector beta_u_t;  // sketch-block coefficients
  Matrix v_hat_t;   // sketch-block sandwich covariance
  FitResult fit;    // augmented model
  Eigen::Index n_used = 0;
  std::vector<int> dropped_columns;  // sketch columns removed by drop_dependent
  std::vector<std::string> warnings;
};

namespace detail {

struct Augmented {
  Matrix z;  // [X_A | kept sketch columns]
  int t = 0;
  std::vector<int> dropped;
};

inline Augmented build_augmented(const MatrixRef& xa, const MatrixRef& sketch, const ScreenOptions& opt,
                                 bool allow_penalized_rank_deficiency) {
  require(xa.rows() == sketch.rows(), Errc::DimensionMismatch,
          "sketch has " + std::to_string(sketch.rows()) + " rows, A's design has " + std::to_string(xa.rows()));
  require(sketch.cols() >= 1, Errc::BadDimensions, "sketch has no columns");
  const auto n = xa.rows();
  const auto pa = xa.cols();
  const auto t = sketch.cols();
  require(n >= pa + t, Errc::RankDeficientAugmented,
          "only " + std::to_string(n) + " rows for " + std::to_string(pa + t) + " augmented columns");
  for (Eigen::Index j = 0; j < t; ++j)
    require(!sketch.col(j).isZero(0.0), Errc::SingularCovarianceBlock,
            "sketch column " + std::to_string(j) + " is identically zero");

  Augmented aug;
  aug.z.resize(n, pa + t);
  aug.z.leftCols(pa) = xa;
  aug.z.rightCols(t) = sketch;
  aug.t = static_cast<int>(t);
  if (numerical_rank(aug.z) == aug.z.cols()) return aug;
  if (allow_penalized_rank_deficiency) return aug;

  require(opt.drop_dependent, Errc::RankDeficientAugmented, "augmented design (X_A | sketch) is rank deficient");
  require(numerical_rank(xa) == pa, Errc::RankDeficientAugmented, "A's design is rank deficient");
  Matrix kept = xa;
  for (Eigen::Index j = 0; j < t; ++j) {
    Matrix cand(n, kept.cols() + 1);
    cand << kept, sketch.col(j);
    if (numerical_rank(cand) == cand.cols()) {
      kept = std::move(cand);
    } else {
      aug.dropped.push_back(static_cast<int>(j));
    }
  }
  aug.t = static_cast<int>(kept.cols() - pa);
  require(aug.t >= 1, Errc::RankDeficientAugmented, "every sketch column lies in the span of A's design");
  aug.z = std::move(kept);
  return aug;
}

inline FitResult checked_fit(const MatrixRef& x, const VectorRef& y, const LossFamily& fam, const SolverConfig& cfg) {
  FitResult f;
  try {
    f = fit_offset(x, y, fam, cfg);
  } catch (const Error& e) {
    if (e.code() == Errc::SingularHessian) fail(Errc::RankDeficientAugmented, e.what());
    throw;
  }
  require(f.converged, Errc::SolverFailure,
          "solver stopped after " + std::to_string(f.iterations) + " iterations, gradient " + std::to_string(f.grad_norm_inf));
  return f;
}

}  // namespace detail

/// Wald screening on the augmented design (X_A | sketch):
///   W = n * b^T V_t^{-1} b,  V = V1^{-1} V2 V1^{-1} from unpenalized pieces,
/// with b and V_t the sketch block. Compared with chi-squared on t df.
inline ScreenReport wald_screen(const MatrixRef& xa, const VectorRef& y, const MatrixRef& sketch, const LossFamily& fam,
                                const ScreenOptions& opt = {}) {
  require(y.size() == xa.rows(), Errc::DimensionMismatch, "response length differs from A's design");
  fam.check_response(y);
  const detail::Augmented aug = detail::build_augmented(xa, sketch, opt, opt.ridge > 0.0);

  SolverConfig cfg = opt.solver;
  cfg.ridge = opt.ridge;
  ScreenReport rep;
  rep.n_used = xa.rows();
  rep.dropped_columns = aug.dropped;
  rep.fit = detail::checked_fit(aug.z, y, fam, cfg);

  auto pieces = sandwich_pieces(aug.z, y, Vector::Zero(y.size()), fam, rep.fit.beta);
  pieces.v1.diagonal().array() += 2.0 * opt.ridge;  // bread of the penalized objective
  const Matrix cov = pieces.covariance(Errc::SingularCovarianceBlock);
  const int t = aug.t;
  rep.beta_u_t = rep.fit.beta.tail(t);
  rep.v_hat_t = cov.bottomRightCorner(t, t);

  Eigen::LLT<Matrix> llt(rep.v_hat_t);
  require(llt.info() == Eigen::Success && llt.rcond() > 1e-14, Errc::SingularCovarianceBlock,
          "sketch-block covariance is not positive definite");
  const double w = static_cast<double>(rep.n_used) * rep.beta_u_t.dot(llt.solve(rep.beta_u_t));
  rep.decision = chi2_decision(w, t, opt.alpha);
  if (!aug.dropped.empty())
    rep.warnings.push_back(std::to_string(aug.dropped.size()) + " dependent sketch column(s) dropped; df reduced to " +
                           std::to_string(t));
  return rep;
}

/// Likelihood-ratio screening: W = 2n (M_A(b_A) - M_U(b_U)), chi-squared on t df.
inline ScreenReport lrt_screen(const MatrixRef& xa, const VectorRef& y, const MatrixRef& sketch, const LossFamily& fam,
                               const ScreenOptions& opt = {}) {
  require(fam.is_glm(), Errc::NotAGlm, "the likelihood-ratio test needs a likelihood; use the Wald test for " + fam.name());
  require(y.size() == xa.rows(), Errc::DimensionMismatch, "response length differs from A's design");
  fam.check_response(y);
  ScreenOptions unpen = opt;
  unpen.ridge = 0.0;
  const detail::Augmented aug = detail::build_augmented(xa, sketch, unpen, false);

  SolverConfig cfg = opt.solver;
  cfg.ridge = 0.0;
  ScreenReport rep;
  rep.n_used = xa.rows();
  rep.dropped_columns = aug.dropped;
  const FitResult fa = detail::checked_fit(xa, y, fam, cfg);
  rep.fit = detail::checked_fit(aug.z, y, fam, cfg);
  rep.beta_u_t = rep.fit.beta.tail(aug.t);

  const double w = std::max(0.0, 2.0 * static_cast<double>(rep.n_used) * (fa.final_loss - rep.fit.final_loss));
  rep.decision = chi2_decision(w, aug.t, opt.alpha);
  if (opt.p_b && sketch.cols() >= *opt.p_b)
    rep.warnings.push_back("likelihood-ratio calibration assumes t < p_B (t=" + std::to_string(sketch.cols()) +
                           ", p_B=" + std::to_string(*opt.p_b) + ")");
  if (!aug.dropped.empty())
    rep.warnings.push_back(std::to_string(aug.dropped.size()) + " dependent sketch column(s) dropped; df reduced to " +
                           std::to_string(aug.t));
  return rep;
}

inline ScreenReport run_screen(ScreenTest test, const MatrixRef& xa, const VectorRef& y, const MatrixRef& sketch,
                               const LossFamily& fam, const ScreenOptions& opt = {}) {
  return test == ScreenTest::Wald ? wald_screen(xa, y, sketch, fam, opt) : lrt_screen(xa, y, sketch, fam, opt);
}

/// Same pipeline restricted to `rows`; `sketch` is indexed like `xa`.
inline ScreenReport screen_on_subset(ScreenTest test, const MatrixRef& xa, const VectorRef& y, const MatrixRef& sketch,
                                     const LossFamily& fam, std::span<const int> rows, const ScreenOptions& opt = {}) {
  for (int r : rows)
    require(r >= 0 && r < xa.rows(), Errc::InvalidArgument, "row index " + std::to_string(r) + " out of range");
  return run_screen(test, select_rows(xa, rows), select_rows(y, rows), select_rows(sketch, rows), fam, opt);
}

/// Screening against a package from B: rows B excluded by clipping are
/// removed from A's side before fitting.
inline ScreenReport screen_package(ScreenTest test, const MatrixRef& xa, const VectorRef& y, const SketchPackage& pkg,
                                   const LossFamily& fam, const ScreenOptions& opt = {}) {
  if (pkg.rows_excluded.empty()) return run_screen(test, xa, y, pkg.projected, fam, opt);
  std::vector<int> keep;
  std::size_t e = 0;
  for (int i = 0; i < xa.rows(); ++i) {
    if (e < pkg.rows_excluded.size() && pkg.rows_excluded[e] == i) {
      ++e;
      continue;
    }
    keep.push_back(i);
  }
  return run_screen(test, select_rows(xa, keep), select_rows(y, keep), pkg.projected, fam, opt);
}

}  // namespace aeal
