#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/loss.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace aeal {

struct SolverConfig {
  double tol = 1e-9;  // on the infinity norm of the penalized gradient
  int max_iter = 100;
  double armijo = 1e-4;
  double shrink = 0.5;
  double ridge = 0.0;  // lambda in lambda * ||beta||_2^2 (no 1/2)

  void validate() const {
    require(tol > 0.0, Errc::InvalidArgument, "solver tol must be positive");
    require(max_iter >= 1, Errc::InvalidArgument, "solver max_iter must be >= 1");
    require(armijo > 0.0 && armijo < 1.0, Errc::InvalidArgument, "armijo constant must lie in (0,1)");
    require(shrink > 0.0 && shrink < 1.0, Errc::InvalidArgument, "line-search shrink must lie in (0,1)");
    require(ridge >= 0.0 && std::isfinite(ridge), Errc::InvalidArgument, "ridge must be nonnegative");
  }
};

struct FitResult {
  Vector beta;
  int iterations = 0;
  double grad_norm_inf = 0.0;  // gradient of the full penalized objective
  Matrix hessian;              // unpenalized (1/n) sum m'' x x^T at beta
  bool converged = false;
  double final_loss = 0.0;  // penalized objective at beta
};

/// (1/n) sum m(y_i, x_i^T beta + o_i) + ridge * ||beta||^2
inline double offset_objective(const MatrixRef& x, const VectorRef& y, const VectorRef& offset,
                               const LossFamily& fam, const VectorRef& beta, double ridge = 0.0) {
  const Vector nu = x * beta + offset;
  return mean_loss(fam, y, nu) + ridge * beta.squaredNorm();
}

namespace detail {

struct Derivs {
  Vector grad;  // per-row m'
  Vector hess;  // per-row m''
};

inline Derivs row_derivs(const LossFamily& fam, const VectorRef& y, const VectorRef& nu) {
  Derivs d{Vector(y.size()), Vector(y.size())};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    d.grad[i] = fam.grad(y[i], nu[i]);
    d.hess[i] = fam.hess(y[i], nu[i]);
  }
  return d;
}

inline Matrix weighted_gram(const MatrixRef& x, const VectorRef& w) {
  const Matrix xw = x.array().colwise() * w.array();
  Matrix g = x.transpose() * xw / static_cast<double>(x.rows());
  return 0.5 * (g + g.transpose());
}

}  // namespace detail

/// Minimizes the offset objective by damped Newton (Armijo backtracking).
/// For canonical GLMs the Newton step is the IRLS step. Non-convergence is
/// reported through `converged == false` with the best iterate; a singular
/// Newton system with ridge == 0 throws SingularHessian.
inline FitResult fit_offset(const MatrixRef& x, const VectorRef& y, const VectorRef& offset, const LossFamily& fam,
                            const SolverConfig& cfg = {}, const std::optional<Vector>& init = std::nullopt) {
  cfg.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  require(n > 0, Errc::BadDimensions, "empty design");
  require(y.size() == n && offset.size() == n, Errc::DimensionMismatch, "design, response and offset lengths differ");
  fam.check_response(y);

  FitResult res;
  res.beta = init ? *init : Vector::Zero(p);
  require(res.beta.size() == p, Errc::DimensionMismatch, "initial coefficients have wrong length");

  const double dn = static_cast<double>(n);
  const auto gradient = [&](const Vector& b, const Vector& nu) {
    Vector g(p);
    Vector mg(n);
    for (Eigen::Index i = 0; i < n; ++i) mg[i] = fam.grad(y[i], nu[i]);
    g.noalias() = x.transpose() * mg / dn;
    g += 2.0 * cfg.ridge * b;
    return g;
  };

  Vector nu = x * res.beta + offset;
  double f = mean_loss(fam, y, nu) + cfg.ridge * res.beta.squaredNorm();
  Vector g = gradient(res.beta, nu);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= cfg.tol) break;

    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = fam.hess(y[i], nu[i]);
    Matrix h = detail::weighted_gram(x, w);
    h.diagonal().array() += 2.0 * cfg.ridge;

    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
      if (cfg.ridge == 0.0) fail(Errc::SingularHessian, "Newton system is numerically singular (rank-deficient design?)");
      break;
    }
    const Vector dir = -llt.solve(g);
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) break;

    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= cfg.shrink) {
      const Vector cand = res.beta + step * dir;
      const Vector cand_nu = x * cand + offset;
      const double fc = mean_loss(fam, y, cand_nu) + cfg.ridge * cand.squaredNorm();
      if (!std::isfinite(fc)) continue;
      bool ok = fc <= f + cfg.armijo * step * slope;
      Vector gc;
      if (!ok && fc - f <= 8.0 * eps * std::abs(f)) {
        // at rounding level the objective is flat; accept if the gradient shrinks
        gc = gradient(cand, cand_nu);
        ok = gc.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>();
      }
      if (ok) {
        res.beta = cand;
        nu = cand_nu;
        g = gc.size() ? gc : gradient(cand, cand_nu);
        f = fc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  res.iterations = it;
  res.grad_norm_inf = g.lpNorm<Eigen::Infinity>();
  res.converged = res.grad_norm_inf <= cfg.tol;
  res.final_loss = f;
  {
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = fam.hess(y[i], nu[i]);
    res.hessian = detail::weighted_gram(x, w);
  }
  return res;
}

inline FitResult fit_offset(const MatrixRef& x, const VectorRef& y, const LossFamily& fam, const SolverConfig& cfg = {}) {
  return fit_offset(x, y, Vector::Zero(x.rows()), fam, cfg);
}

/// Sandwich pieces at beta (penalty never enters):
///   V1 = (1/n) sum m''(y_i, nu_i) x_i x_i^T,  V2 = (1/n) sum m'(y_i, nu_i)^2 x_i x_i^T.
struct SandwichPieces {
  Matrix v1;
  Matrix v2;

  /// V1^{-1} V2 V1^{-1}; throws `on_singular` when V1 is not positive definite.
  Matrix covariance(Errc on_singular = Errc::SingularVariance) const {
    Eigen::LLT<Matrix> llt(v1);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) fail(on_singular, "V1 is not positive definite");
    const Matrix inv = llt.solve(Matrix::Identity(v1.rows(), v1.cols()));
    Matrix c = inv * v2 * inv;
    return 0.5 * (c + c.transpose());
  }
};

inline SandwichPieces sandwich_pieces(const MatrixRef& x, const VectorRef& y, const VectorRef& offset,
                                      const LossFamily& fam, const VectorRef& beta) {
  require(x.rows() == y.size() && y.size() == offset.size(), Errc::DimensionMismatch, "sandwich inputs differ in length");
  const Vector nu = x * beta + offset;
  const auto d = detail::row_derivs(fam, y, nu);
  return {detail::weighted_gram(x, d.hess), detail::weighted_gram(x, d.grad.array().square().matrix())};
}

}  // namespace aeal
