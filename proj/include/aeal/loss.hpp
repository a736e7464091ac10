#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace aeal {

enum class FamilyKind { Gaussian, Logistic, Poisson, LogCosh };

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// A loss m(y, nu) on the linear predictor nu, with analytic nu-derivatives.
///
/// GLM kinds are negative log-likelihoods of the canonical-link exponential
/// family with the normalizing term c(y) dropped and dispersion fixed at 1:
///   Gaussian  (y - nu)^2 / 2
///   Logistic  log(1 + e^nu) - y nu
///   Poisson   e^nu - y nu
/// LogCosh is the robust loss (1/alpha) log cosh(alpha (y - nu)).
class LossFamily {
 public:
  static LossFamily gaussian() { return LossFamily(FamilyKind::Gaussian, 0.0); }
  static LossFamily logistic() { return LossFamily(FamilyKind::Logistic, 0.0); }
  static LossFamily poisson() { return LossFamily(FamilyKind::Poisson, 0.0); }
  static LossFamily log_cosh(double alpha = 0.3) {
    require(std::isfinite(alpha) && alpha > 0.0, Errc::InvalidArgument, "log-cosh alpha must be positive");
    return LossFamily(FamilyKind::LogCosh, alpha);
  }

  /// Accepts "gaussian" | "logistic" | "poisson" | "logcosh" | "logcosh:<alpha>".
  static LossFamily parse(std::string_view s) {
    if (s == "gaussian") return gaussian();
    if (s == "logistic") return logistic();
    if (s == "poisson") return poisson();
    if (s == "logcosh") return log_cosh();
    constexpr std::string_view prefix = "logcosh:";
    if (s.starts_with(prefix)) {
      const auto rest = s.substr(prefix.size());
      double alpha = 0.0;
      const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), alpha);
      require(ec == std::errc() && ptr == rest.data() + rest.size(), Errc::InvalidArgument,
              "bad log-cosh alpha in '" + std::string(s) + "'");
      return log_cosh(alpha);
    }
    fail(Errc::InvalidArgument, "unknown family '" + std::string(s) + "'");
  }

  std::string name() const {
    switch (kind_) {
      case FamilyKind::Gaussian: return "gaussian";
      case FamilyKind::Logistic: return "logistic";
      case FamilyKind::Poisson: return "poisson";
      case FamilyKind::LogCosh: {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), alpha_);
        return "logcosh:" + std::string(buf, res.ptr);
      }
    }
    return {};
  }

  FamilyKind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }
  bool is_glm() const noexcept { return kind_ != FamilyKind::LogCosh; }

  bool supports(double y) const noexcept {
    if (!std::isfinite(y)) return false;
    switch (kind_) {
      case FamilyKind::Logistic: return y == 0.0 || y == 1.0;
      case FamilyKind::Poisson: return y >= 0.0 && y == std::floor(y);
      default: return true;
    }
  }

  void check_response(double y) const {
    if (!supports(y)) fail(Errc::UnsupportedResponse, "response " + std::to_string(y) + " not in support of " + name());
  }

  void check_response(const VectorRef& y) const {
    for (Eigen::Index i = 0; i < y.size(); ++i) check_response(y[i]);
  }

  // Unchecked evaluations; callers validate the response once up front.

  double value(double y, double nu) const noexcept {
    switch (kind_) {
      case FamilyKind::Gaussian: return 0.5 * (y - nu) * (y - nu);
      case FamilyKind::Logistic: return detail::softplus(nu) - y * nu;
      case FamilyKind::Poisson: return std::exp(nu) - y * nu;
      case FamilyKind::LogCosh: {
        const double z = std::abs(alpha_ * (y - nu));
        return (z + std::log1p(std::exp(-2.0 * z)) - std::numbers::ln2) / alpha_;
      }
    }
    return 0.0;
  }

  double grad(double y, double nu) const noexcept {
    switch (kind_) {
      case FamilyKind::Gaussian: return nu - y;
      case FamilyKind::Logistic: return detail::sigmoid(nu) - y;
      case FamilyKind::Poisson: return std::exp(nu) - y;
      case FamilyKind::LogCosh: return std::tanh(alpha_ * (nu - y));
    }
    return 0.0;
  }

  double hess(double y, double nu) const noexcept {
    switch (kind_) {
      case FamilyKind::Gaussian: return 1.0;
      case FamilyKind::Logistic: {
        const double e = std::exp(-std::abs(nu));
        return e / ((1.0 + e) * (1.0 + e));
      }
      case FamilyKind::Poisson: return std::exp(nu);
      case FamilyKind::LogCosh: {
        // alpha * sech^2(z), written to stay positive for large |z|
        const double e = std::exp(-2.0 * std::abs(alpha_ * (nu - y)));
        return alpha_ * 4.0 * e / ((1.0 + e) * (1.0 + e));
      }
    }
    return 0.0;
  }

  /// Mean-scale map g^{-1}. LogCosh has none and throws NotAGlm; use
  /// predict_mean() when the identity fallback is wanted.
  double inverse_link(double nu) const {
    switch (kind_) {
      case FamilyKind::Gaussian: return nu;
      case FamilyKind::Logistic: return detail::sigmoid(nu);
      case FamilyKind::Poisson: return std::exp(nu);
      case FamilyKind::LogCosh: break;
    }
    fail(Errc::NotAGlm, "log-cosh loss has no inverse link");
  }

  /// Point prediction on the response scale; LogCosh predicts nu itself.
  double predict_mean(double nu) const { return is_glm() ? inverse_link(nu) : nu; }

  bool operator==(const LossFamily&) const = default;

 private:
  LossFamily(FamilyKind kind, double alpha) : kind_(kind), alpha_(alpha) {}

  FamilyKind kind_;
  double alpha_;
};

inline double loss_value(const LossFamily& fam, double y, double nu) {
  fam.check_response(y);
  return fam.value(y, nu);
}

inline double loss_grad(const LossFamily& fam, double y, double nu) {
  fam.check_response(y);
  return fam.grad(y, nu);
}

inline double loss_hess(const LossFamily& fam, double y, double nu) {
  fam.check_response(y);
  return fam.hess(y, nu);
}

inline double inverse_link(const LossFamily& fam, double nu) { return fam.inverse_link(nu); }

/// (1/n) sum_i m(y_i, nu_i)
inline double mean_loss(const LossFamily& fam, const VectorRef& y, const VectorRef& nu) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) s += fam.value(y[i], nu[i]);
  return y.size() > 0 ? s / static_cast<double>(y.size()) : 0.0;
}

}  // namespace aeal
