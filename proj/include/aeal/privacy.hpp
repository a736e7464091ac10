#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace aeal {

/// What B hands to A for screening. `u_seed` stays on B's side; the wire
/// encoder has no field for it.
struct SketchPackage {
  Matrix projected;  // rows kept x t
  int t = 0;
  bool noised = false;
  std::optional<double> epsilon;
  std::optional<double> clip_bound;
  double noise_scale = 0.0;
  std::vector<int> rows_excluded;  // indices into the aligned rows, ascending
  std::uint64_t u_seed = 0;
};

struct MaskedResponse {
  Vector y_prime;
  double flip_prob = 0.0;
};

/// p_B x t matrix; column j is a standard normal vector scaled to unit length.
inline Matrix make_projection(int p_b, int t, Rng& rng) {
  require(t >= 1 && t <= p_b, Errc::BadDimensions,
          "projection needs 1 <= t <= p_B (t=" + std::to_string(t) + ", p_B=" + std::to_string(p_b) + ")");
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix u(p_b, t);
  for (int j = 0; j < t; ++j) {
    double norm = 0.0;
    do {
      for (int i = 0; i < p_b; ++i) u(i, j) = z(rng);
      norm = u.col(j).norm();
    } while (norm == 0.0);
    u.col(j) /= norm;
  }
  return u;
}

inline Matrix project(const MatrixRef& xb, const MatrixRef& u) {
  require(xb.cols() == u.rows(), Errc::DimensionMismatch, "projection rows differ from p_B");
  return xb * u;
}

inline Matrix project(const MatrixRef& xb, const MatrixRef& u, std::span<const int> rows) {
  return project(select_rows(xb, rows), u);
}

struct ClipResult {
  Matrix kept;
  std::vector<int> kept_rows;
  std::vector<int> excluded;
};

/// Keeps rows with l2 norm <= c2 (inclusive).
inline ClipResult clip_rows(const MatrixRef& xb, double c2) {
  require(c2 > 0.0 && std::isfinite(c2), Errc::InvalidArgument, "clip bound must be positive");
  ClipResult r;
  for (Eigen::Index i = 0; i < xb.rows(); ++i)
    (xb.row(i).norm() <= c2 ? r.kept_rows : r.excluded).push_back(static_cast<int>(i));
  r.kept = select_rows(xb, r.kept_rows);
  return r;
}

/// Per-entry scale that makes the release of one t-dimensional sketch row
/// epsilon-LDP when every source row has norm <= c2.
inline double laplace_scale(double epsilon, int t, double c2) {
  require(epsilon > 0.0 && std::isfinite(epsilon), Errc::BadEpsilon, "epsilon must be positive");
  require(c2 > 0.0, Errc::InvalidArgument, "clip bound must be positive");
  require(t >= 1, Errc::BadDimensions, "t must be >= 1");
  return 2.0 * t * c2 / epsilon;
}

/// Laplace(0, b) by inversion.
inline double sample_laplace(double b, Rng& rng) {
  const double u = open_uniform(rng) - 0.5;
  return -b * (u < 0.0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
}

inline Matrix add_laplace(const MatrixRef& m, double b, Rng& rng) {
  require(b >= 0.0 && std::isfinite(b), Errc::InvalidArgument, "Laplace scale must be nonnegative");
  Matrix out = m;
  if (b == 0.0) return out;
  // column-major fill order keeps draws reproducible regardless of storage
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) += sample_laplace(b, rng);
  return out;
}

inline Matrix laplace_noise(const MatrixRef& m, double epsilon, double c2, Rng& rng) {
  return add_laplace(m, laplace_scale(epsilon, static_cast<int>(m.cols()), c2), rng);
}

struct SketchOptions {
  int t = 1;
  std::uint64_t u_seed = 0;
  std::uint64_t noise_seed = 1;
  // Either a privacy budget (rows beyond clip_bound are excluded) ...
  std::optional<double> epsilon;
  std::optional<double> clip_bound;
  // ... or a raw per-entry Laplace scale. The reported budget is then the one
  // implied by the largest row norm.
  std::optional<double> noise_scale;
};

/// B-side: draw U, project, optionally clip and noise.
inline SketchPackage make_sketch(const MatrixRef& xb, const SketchOptions& opt) {
  require(!(opt.epsilon && opt.noise_scale), Errc::InvalidArgument, "give either epsilon or a noise scale, not both");
  Rng u_rng(opt.u_seed);
  const Matrix u = make_projection(static_cast<int>(xb.cols()), opt.t, u_rng);

  SketchPackage pkg;
  pkg.t = opt.t;
  pkg.u_seed = opt.u_seed;
  Rng noise_rng(opt.noise_seed);
  if (opt.epsilon) {
    require(opt.clip_bound.has_value(), Errc::InvalidArgument, "an epsilon budget needs a clip bound");
    const ClipResult clip = clip_rows(xb, *opt.clip_bound);
    pkg.rows_excluded = clip.excluded;
    pkg.noised = true;
    pkg.epsilon = opt.epsilon;
    pkg.clip_bound = opt.clip_bound;
    pkg.noise_scale = laplace_scale(*opt.epsilon, opt.t, *opt.clip_bound);
    pkg.projected = add_laplace(project(clip.kept, u), pkg.noise_scale, noise_rng);
  } else if (opt.noise_scale && *opt.noise_scale > 0.0) {
    const double c2 = xb.rowwise().norm().maxCoeff();
    pkg.noised = true;
    pkg.noise_scale = *opt.noise_scale;
    pkg.clip_bound = c2;
    pkg.epsilon = 2.0 * opt.t * c2 / *opt.noise_scale;
    pkg.projected = add_laplace(project(xb, u), pkg.noise_scale, noise_rng);
  } else {
    pkg.projected = project(xb, u);
  }
  return pkg;
}

inline void check_flip_prob(double p) {
  require(p > 0.0 && p < 0.5, Errc::BadFlipProb, "flip probability must lie in (0, 0.5)");
}

/// Randomized response: flips each 0/1 label independently with probability p.
inline MaskedResponse mask_response(const VectorRef& y, double p, Rng& rng) {
  check_flip_prob(p);
  MaskedResponse m{Vector(y.size()), p};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    require(y[i] == 0.0 || y[i] == 1.0, Errc::UnsupportedResponse, "randomized response needs 0/1 labels");
    m.y_prime[i] = unif(rng) < p ? 1.0 - y[i] : y[i];
  }
  return m;
}

/// P(Y=1) from P(Y'=1) = p + (1 - 2p) P(Y=1), clamped to [0, 1].
inline double unmask_probability(double p_hat_prime, double p) {
  check_flip_prob(p);
  require(p_hat_prime >= 0.0 && p_hat_prime <= 1.0, Errc::DomainError, "probability must lie in [0,1]");
  return std::clamp((p_hat_prime - p) / (1.0 - 2.0 * p), 0.0, 1.0);
}

/// Budget achieved by randomized response at flip probability p.
inline double implied_epsilon(double p) {
  check_flip_prob(p);
  return std::log((1.0 - p) / p);
}

}  // namespace aeal
