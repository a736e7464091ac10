#pragma once

#include "aeal/data.hpp"
#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/loss.hpp"
#include "aeal/rng.hpp"
#include "aeal/solver.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aeal {

enum class Setting { S1, S2, S3 };
enum class Hypothesis { H0, H1 };

inline Setting parse_setting(std::string_view s) {
  if (s == "1" || s == "S1" || s == "s1") return Setting::S1;
  if (s == "2" || s == "S2" || s == "s2") return Setting::S2;
  if (s == "3" || s == "S3" || s == "s3") return Setting::S3;
  fail(Errc::InvalidArgument, "unknown setting '" + std::string(s) + "' (expected 1, 2 or 3)");
}

inline int setting_number(Setting s) { return s == Setting::S1 ? 1 : s == Setting::S2 ? 2 : 3; }

/// p = 12 columns x1..x12. A holds x1..x6 / x1..x8 / x1..x10 and B holds
/// x7..x12 / x5..x12 / x3..x12 in settings 1 / 2 / 3.
inline std::vector<Owner> setting_ownership(Setting s) {
  const int a_last = s == Setting::S1 ? 6 : s == Setting::S2 ? 8 : 10;
  const int b_first = s == Setting::S1 ? 7 : s == Setting::S2 ? 5 : 3;
  std::vector<Owner> o;
  for (int j = 1; j <= 12; ++j) {
    const bool a = j <= a_last;
    const bool b = j >= b_first;
    o.push_back(a && b ? Owner::Shared : a ? Owner::A : Owner::B);
  }
  return o;
}

/// Symmetric square root of V_ij = rho^|i-j|.
inline Matrix ar1_sqrt(int p, double rho) {
  require(rho >= 0.0 && rho < 1.0, Errc::InvalidArgument, "rho must lie in [0,1)");
  Matrix v(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) v(i, j) = std::pow(rho, std::abs(i - j));
  Eigen::SelfAdjointEigenSolver<Matrix> es(v);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// X = X~ sqrt(V) with X~ i.i.d. Uniform(0,1); rho = 0 returns X~ itself.
inline Matrix gen_covariates(Eigen::Index n, int p, double rho, Rng& rng) {
  require(n >= 1 && p >= 1, Errc::BadDimensions, "covariate matrix needs n, p >= 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = unif(rng);
  if (rho == 0.0) return x;
  return x * ar1_sqrt(p, rho);
}

/// Draws y given nu = X beta: N(nu, 1) for Gaussian and log-cosh designs,
/// Bernoulli(sigmoid(nu)) for logistic, Poisson(e^nu) for Poisson.
inline Vector gen_response(const LossFamily& fam, const MatrixRef& x, const VectorRef& beta, Rng& rng) {
  require(x.cols() == beta.size(), Errc::DimensionMismatch, "coefficient length differs from covariate count");
  const Vector nu = x * beta;
  Vector y(nu.size());
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    switch (fam.kind()) {
      case FamilyKind::Gaussian:
      case FamilyKind::LogCosh: y[i] = nu[i] + z(rng); break;
      case FamilyKind::Logistic: y[i] = unif(rng) < fam.inverse_link(nu[i]) ? 1.0 : 0.0; break;
      case FamilyKind::Poisson: {
        std::poisson_distribution<long long> pois(std::exp(nu[i]));
        y[i] = static_cast<double>(pois(rng));
        break;
      }
    }
  }
  return y;
}

/// Under H0 every column A sees has coefficient 0.5 (0.1 for Poisson) and the
/// rest are zero; under H1 all twelve are i.i.d. N(0, 0.25) (N(0, 0.01) for
/// Poisson), drawn afresh per call.
inline Vector setting_coefficients(Setting s, Hypothesis h, const LossFamily& fam, Rng& rng) {
  const auto own = setting_ownership(s);
  const bool pois = fam.kind() == FamilyKind::Poisson;
  Vector beta(static_cast<Eigen::Index>(own.size()));
  if (h == Hypothesis::H0) {
    for (std::size_t j = 0; j < own.size(); ++j)
      beta[static_cast<Eigen::Index>(j)] = visible_to(own[j], Agent::A) ? (pois ? 0.1 : 0.5) : 0.0;
  } else {
    std::normal_distribution<double> z(0.0, pois ? 0.1 : 0.5);
    for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = z(rng);
  }
  return beta;
}

struct SimDesign {
  Setting setting = Setting::S1;
  Eigen::Index n = 2000;
  double rho = 0.0;
  LossFamily fam = LossFamily::logistic();
  Hypothesis hypothesis = Hypothesis::H0;
  std::optional<Vector> beta;  // overrides the setting's coefficients
};

struct SimData {
  AlignedDataset data;
  Vector beta;  // true pooled coefficients
};

inline AlignedDataset assemble(const MatrixRef& x, const VectorRef& y, const std::vector<Owner>& own) {
  require(static_cast<Eigen::Index>(own.size()) == x.cols(), Errc::DimensionMismatch, "ownership map has wrong length");
  std::vector<Column> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    cols.push_back({"x" + std::to_string(j + 1), x.col(j), own[static_cast<std::size_t>(j)]});
  return AlignedDataset(y, std::move(cols));
}

/// The columns of pooled-space rows that agent `a` sees, in pooled order. No
/// rank check, so it also serves for a handful of prediction points.
inline Matrix agent_columns(const MatrixRef& x, const std::vector<Owner>& own, Agent a) {
  require(static_cast<Eigen::Index>(own.size()) == x.cols(), Errc::DimensionMismatch, "ownership map has wrong length");
  std::vector<Eigen::Index> idx;
  for (std::size_t j = 0; j < own.size(); ++j)
    if (visible_to(own[j], a)) idx.push_back(static_cast<Eigen::Index>(j));
  Matrix out(x.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(idx[k]);
  return out;
}

/// Covariates, coefficients and response drawn in that order from `rng`.
inline SimData simulate(const SimDesign& d, Rng& rng) {
  const auto own = setting_ownership(d.setting);
  const Matrix x = gen_covariates(d.n, static_cast<int>(own.size()), d.rho, rng);
  Vector beta = d.beta ? *d.beta : setting_coefficients(d.setting, d.hypothesis, d.fam, rng);
  const Vector y = gen_response(d.fam, x, beta, rng);
  return {assemble(x, y, own), std::move(beta)};
}

/// The M-estimator on the pooled (deduplicated) design.
inline FitResult oracle_fit(const MatrixRef& x, const VectorRef& y, const LossFamily& fam, double ridge = 0.0,
                            SolverConfig cfg = {}) {
  cfg.ridge = ridge;
  FitResult f = fit_offset(x, y, fam, cfg);
  require(f.converged, Errc::SolverFailure, "oracle fit did not converge");
  return f;
}

/// Pooled-space coefficients from the two agents' vectors: own columns copied,
/// shared columns summed.
inline Vector map_T(const VectorRef& beta_a, const VectorRef& beta_b, const std::vector<Owner>& own) {
  Vector out(static_cast<Eigen::Index>(own.size()));
  Eigen::Index ia = 0;
  Eigen::Index ib = 0;
  for (std::size_t j = 0; j < own.size(); ++j) {
    double v = 0.0;
    if (visible_to(own[j], Agent::A)) {
      require(ia < beta_a.size(), Errc::DimensionMismatch, "beta_A shorter than A's columns");
      v += beta_a[ia++];
    }
    if (visible_to(own[j], Agent::B)) {
      require(ib < beta_b.size(), Errc::DimensionMismatch, "beta_B shorter than B's columns");
      v += beta_b[ib++];
    }
    out[static_cast<Eigen::Index>(j)] = v;
  }
  require(ia == beta_a.size() && ib == beta_b.size(), Errc::DimensionMismatch, "coefficient vectors longer than views");
  return out;
}

/// 1 - lmin^3 / (4 lmax^3) for a symmetric positive definite matrix.
inline double eta_from_hessian(const MatrixRef& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  require(lmin > 0.0, Errc::DomainError, "Hessian is not positive definite");
  const double r = lmin / lmax;
  return 1.0 - r * r * r / 4.0;
}

/// Contraction bound from the pooled Hessian (1/n) sum m'' x x^T at beta.
inline double eta_bound(const MatrixRef& x, const VectorRef& y, const LossFamily& fam, const VectorRef& beta) {
  const auto pieces = sandwich_pieces(x, y, Vector::Zero(x.rows()), fam, beta);
  return eta_from_hessian(pieces.v1);
}

}  // namespace aeal
