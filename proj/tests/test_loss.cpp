#include "aeal/loss.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using aeal::Errc;
using aeal::FamilyKind;
using aeal::LossFamily;

namespace {

std::vector<LossFamily> all_families() {
  return {LossFamily::gaussian(), LossFamily::logistic(), LossFamily::poisson(), LossFamily::log_cosh(0.3)};
}

// central differences with a step scaled to nu
double fd(const auto& f, double nu) {
  const double h = 1e-5 * std::max(1.0, std::abs(nu));
  return (f(nu + h) - f(nu - h)) / (2.0 * h);
}

}  // namespace

TEST(Loss, KnownValues) {
  EXPECT_NEAR(aeal::loss_value(LossFamily::logistic(), 1.0, 0.0), 0.6931472, 1e-7);
  EXPECT_DOUBLE_EQ(aeal::loss_value(LossFamily::poisson(), 2.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(aeal::loss_value(LossFamily::log_cosh(0.3), 1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(aeal::loss_value(LossFamily::gaussian(), 3.0, 1.0), 2.0);
}

TEST(Loss, KnownDerivatives) {
  EXPECT_DOUBLE_EQ(aeal::loss_grad(LossFamily::logistic(), 1.0, 0.0), -0.5);
  EXPECT_DOUBLE_EQ(aeal::loss_hess(LossFamily::gaussian(), 4.0, -7.0), 1.0);
  EXPECT_DOUBLE_EQ(aeal::loss_hess(LossFamily::gaussian(), 0.0, 0.0), 1.0);
  const double g = aeal::loss_grad(LossFamily::log_cosh(0.3), 0.0, 2.0);
  EXPECT_NEAR(g, std::tanh(0.6), 1e-15);
  EXPECT_NEAR(g, 0.5370495669980353, 1e-12);
}

TEST(Loss, DerivativesMatchFiniteDifferences) {
  const std::vector<std::pair<double, double>> points{{0.0, -2.0}, {1.0, 0.3}, {3.0, 1.1}, {0.0, 4.0}, {1.0, -6.0}};
  for (const auto& fam : all_families()) {
    for (auto [y, nu] : points) {
      if (!fam.supports(y)) continue;
      const double g_fd = fd([&](double v) { return fam.value(y, v); }, nu);
      const double h_fd = fd([&](double v) { return fam.grad(y, v); }, nu);
      EXPECT_NEAR(fam.grad(y, nu), g_fd, 1e-6 * std::max(1.0, std::abs(g_fd))) << fam.name() << " y=" << y << " nu=" << nu;
      EXPECT_NEAR(fam.hess(y, nu), h_fd, 1e-6 * std::max(1.0, std::abs(h_fd))) << fam.name() << " y=" << y << " nu=" << nu;
    }
  }
}

TEST(Loss, ConvexAndStableInTheTails) {
  for (const auto& fam : all_families()) {
    for (double nu : {-800.0, -40.0, 0.0, 40.0, 700.0}) {
      const double y = fam.kind() == FamilyKind::Poisson ? 1.0 : 0.0;
      EXPECT_GE(fam.hess(y, nu), 0.0) << fam.name() << " nu=" << nu;
      if (fam.kind() != FamilyKind::Poisson) {
        EXPECT_TRUE(std::isfinite(fam.value(y, nu))) << fam.name() << " nu=" << nu;
        EXPECT_TRUE(std::isfinite(fam.grad(y, nu))) << fam.name() << " nu=" << nu;
      }
    }
  }
  // log(1 + e^800) - 0 must not overflow
  EXPECT_DOUBLE_EQ(LossFamily::logistic().value(0.0, 800.0), 800.0);
  // log-cosh grows linearly: (|z| - log 2) / alpha for large residuals
  EXPECT_NEAR(LossFamily::log_cosh(0.3).value(0.0, 1000.0), (300.0 - std::log(2.0)) / 0.3, 1e-9);
}

TEST(Loss, InverseLink) {
  EXPECT_DOUBLE_EQ(aeal::inverse_link(LossFamily::logistic(), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(aeal::inverse_link(LossFamily::gaussian(), 3.2), 3.2);
  EXPECT_NEAR(aeal::inverse_link(LossFamily::poisson(), 1.0), 2.7182818, 1e-7);
  try {
    (void)LossFamily::log_cosh().inverse_link(0.0);
    FAIL() << "expected NotAGlm";
  } catch (const aeal::Error& e) {
    EXPECT_EQ(e.code(), Errc::NotAGlm);
  }
  EXPECT_DOUBLE_EQ(LossFamily::log_cosh().predict_mean(1.5), 1.5);
}

TEST(Loss, ResponseSupport) {
  const auto expect_unsupported = [](const LossFamily& f, double y) {
    try {
      (void)aeal::loss_value(f, y, 0.0);
      ADD_FAILURE() << f.name() << " accepted y=" << y;
    } catch (const aeal::Error& e) {
      EXPECT_EQ(e.code(), Errc::UnsupportedResponse);
    }
  };
  expect_unsupported(LossFamily::logistic(), 0.5);
  expect_unsupported(LossFamily::logistic(), 2.0);
  expect_unsupported(LossFamily::poisson(), -1.0);
  expect_unsupported(LossFamily::poisson(), 1.5);
  expect_unsupported(LossFamily::gaussian(), std::nan(""));
  EXPECT_NO_THROW((void)aeal::loss_value(LossFamily::gaussian(), -3.7, 0.0));
}

TEST(Loss, ParseRoundTrip) {
  for (const auto& fam : all_families()) EXPECT_EQ(LossFamily::parse(fam.name()), fam);
  EXPECT_DOUBLE_EQ(LossFamily::parse("logcosh:1.5").alpha(), 1.5);
  EXPECT_DOUBLE_EQ(LossFamily::parse("logcosh").alpha(), 0.3);
  EXPECT_THROW(LossFamily::parse("probit"), aeal::Error);
  EXPECT_THROW(LossFamily::parse("logcosh:-1"), aeal::Error);
  EXPECT_THROW(LossFamily::parse("logcosh:x"), aeal::Error);
}

TEST(Loss, MeanLoss) {
  aeal::Vector y(3), nu(3);
  y << 1, 2, 3;
  nu << 1, 1, 1;
  EXPECT_DOUBLE_EQ(aeal::mean_loss(LossFamily::gaussian(), y, nu), (0.0 + 0.5 + 2.0) / 3.0);
}
