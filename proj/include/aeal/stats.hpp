#pragma once

#include "aeal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace aeal {

struct TestDecision {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
};

namespace detail {

// Lower regularized gamma P(a, x) by its power series; converges fast for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by modified Lentz continued fraction; for x >= a + 1.
inline double gamma_q_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Upper regularized incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  require(a > 0.0, Errc::DomainError, "gamma_q requires a > 0");
  require(x >= 0.0, Errc::DomainError, "gamma_q requires x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

/// P(chi^2_df > x)
inline double chi2_sf(double x, int df) {
  require(df > 0, Errc::DomainError, "chi-squared df must be positive");
  require(x >= 0.0 || std::isnan(x), Errc::DomainError, "chi-squared statistic must be nonnegative");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  return gamma_q(0.5 * df, 0.5 * x);
}

/// Upper-alpha quantile: x with chi2_sf(x, df) = alpha, by bisection.
inline double chi2_upper_quantile(double alpha, int df) {
  require(alpha > 0.0 && alpha < 1.0, Errc::DomainError, "alpha must lie in (0,1)");
  double lo = 0.0;
  double hi = std::max(1.0, 2.0 * df);
  while (chi2_sf(hi, df) > alpha) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_sf(mid, df) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline TestDecision chi2_decision(double statistic, int df, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, Errc::DomainError, "significance level must lie in (0,1)");
  TestDecision d;
  d.statistic = statistic;
  d.df = df;
  d.p_value = chi2_sf(std::max(statistic, 0.0), df);
  d.alpha = alpha;
  d.reject = d.p_value < alpha;
  return d;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley refinement against erfc.
inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, Errc::DomainError, "normal_quantile requires p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x = 0.0;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step; work in the tail that keeps the residual accurate
  const double e = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted 1/2.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  require(scores.size() == labels.size(), Errc::DimensionMismatch, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  double n_pos = 0.0;
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      const double l = labels[order[k]];
      require(l == 0.0 || l == 1.0, Errc::DomainError, "labels must be 0/1");
      if (l == 1.0) {
        n_pos += 1.0;
        rank_sum_pos += mid_rank;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  require(n_pos > 0.0 && n_neg > 0.0, Errc::OneClassOnly, "AUC needs both classes present");
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct KsResult {
  double distance = 0.0;
  double p_value = 1.0;
};

/// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-18) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// KS distance of a sample to Uniform(0,1), with the asymptotic p-value
/// (Stephens' small-sample correction on the scaling).
inline KsResult ks_uniform(std::span<const double> p_values) {
  require(!p_values.empty(), Errc::InvalidArgument, "ks_uniform needs at least one value");
  std::vector<double> s(p_values.begin(), p_values.end());
  std::sort(s.begin(), s.end());
  const double m = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double fi = static_cast<double>(i);
    d = std::max({d, (fi + 1.0) / m - s[i], s[i] - fi / m});
  }
  const double sm = std::sqrt(m);
  return {d, kolmogorov_q((sm + 0.12 + 0.11 / sm) * d)};
}

}  // namespace aeal
