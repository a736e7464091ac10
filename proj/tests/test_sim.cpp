#include "aeal/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace aeal;

namespace {

Matrix ar1(int p, double rho) {
  Matrix v(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) v(i, j) = std::pow(rho, std::abs(i - j));
  return v;
}

/// Denman-Beavers iteration for the principal square root.
Matrix db_sqrt(const Matrix& a) {
  Matrix y = a, z = Matrix::Identity(a.rows(), a.cols());
  for (int it = 0; it < 60; ++it) {
    const Matrix yn = 0.5 * (y + z.inverse());
    const Matrix zn = 0.5 * (z + y.inverse());
    y = yn;
    z = zn;
  }
  return y;
}

/// Largest and smallest eigenvalue of an SPD matrix by power and inverse
/// iteration with Rayleigh quotients.
std::pair<double, double> extreme_eigs(const Matrix& h) {
  Vector v = Vector::Ones(h.rows()).normalized();
  for (int it = 0; it < 5000; ++it) v = (h * v).normalized();
  const double lmax = v.dot(h * v);
  const auto lu = h.partialPivLu();
  Vector w = Vector::LinSpaced(h.rows(), 1.0, 2.0).normalized();
  for (int it = 0; it < 5000; ++it) w = lu.solve(w).normalized();
  const double lmin = w.dot(h * w);
  return {lmax, lmin};
}

}  // namespace

TEST(Covariates, ZeroRhoIsRawUniforms) {
  Rng a(21), b(21);
  const Matrix x = gen_covariates(50, 4, 0.0, a);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 4; ++j) ASSERT_EQ(x(i, j), u(b));
}

TEST(Covariates, SingleColumnUnchanged) {
  Rng a(3), b(3);
  const Matrix x = gen_covariates(20, 1, 0.6, a);
  const Matrix raw = gen_covariates(20, 1, 0.0, b);
  EXPECT_LE((x - raw).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Covariates, SquareRootMatchesIndependentIteration) {
  for (double rho : {0.1, 0.25, 0.5, 0.9}) {
    const Matrix s = ar1_sqrt(12, rho);
    EXPECT_LE((s * s - ar1(12, rho)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s - db_sqrt(ar1(12, rho))).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Covariates, AdjacentCorrelation) {
  Rng rng(7);
  const int p = 5;
  const double rho = 0.25;
  const Matrix x = gen_covariates(100000, p, rho, rng);
  // Cov(X) = S^T (I/12) S with S the independent square root
  const Matrix s = db_sqrt(ar1(p, rho));
  const Matrix cov = s.transpose() * s / 12.0;
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Matrix emp = xc.transpose() * xc / static_cast<double>(x.rows() - 1);
  for (int j = 0; j + 1 < p; ++j) {
    const double expect = cov(j, j + 1) / std::sqrt(cov(j, j) * cov(j + 1, j + 1));
    const double got = emp(j, j + 1) / std::sqrt(emp(j, j) * emp(j + 1, j + 1));
    EXPECT_NEAR(got, expect, 0.02) << j;
  }
}

TEST(Covariates, EntriesWithinRowBounds) {
  Rng rng(8);
  const double rho = 0.5;
  const Matrix x = gen_covariates(2000, 6, rho, rng);
  const Matrix s = ar1_sqrt(6, rho);
  for (int j = 0; j < 6; ++j) {
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < 6; ++k) (s(k, j) < 0 ? lo : hi) += s(k, j);
    EXPECT_GE(x.col(j).minCoeff(), lo - 1e-12);
    EXPECT_LE(x.col(j).maxCoeff(), hi + 1e-12);
  }
}

TEST(Covariates, Deterministic) {
  Rng a(99), b(99);
  EXPECT_EQ(gen_covariates(30, 12, 0.3, a), gen_covariates(30, 12, 0.3, b));
  Rng c(1);
  EXPECT_THROW(gen_covariates(10, 3, 1.0, c), Error);
}

TEST(Response, Moments) {
  const int n = 10000;
  Rng rng(4);
  const Matrix x = gen_covariates(n, 3, 0.0, rng);
  const Vector zero = Vector::Zero(3);
  const Vector yl = gen_response(LossFamily::logistic(), x, zero, rng);
  EXPECT_NEAR(yl.mean(), 0.5, 0.02);
  EXPECT_TRUE((yl.array() == 0.0 || yl.array() == 1.0).all());
  const Vector yg = gen_response(LossFamily::gaussian(), x, zero, rng);
  const double var = (yg.array() - yg.mean()).square().sum() / (n - 1);
  EXPECT_GE(var, 0.95);
  EXPECT_LE(var, 1.05);
  const Vector beta = Vector::Constant(3, 0.1);
  const Vector yp = gen_response(LossFamily::poisson(), x, beta, rng);
  const double rate = (x * beta).array().exp().mean();
  EXPECT_NEAR(yp.mean(), rate, 0.05);
  EXPECT_TRUE((yp.array() >= 0.0).all());
}

TEST(Settings, OwnershipCounts) {
  auto count = [](Setting s, Owner o) {
    const auto own = setting_ownership(s);
    return std::count(own.begin(), own.end(), o);
  };
  EXPECT_EQ(count(Setting::S1, Owner::A), 6);
  EXPECT_EQ(count(Setting::S1, Owner::Shared), 0);
  EXPECT_EQ(count(Setting::S2, Owner::Shared), 4);
  EXPECT_EQ(count(Setting::S2, Owner::B), 4);
  EXPECT_EQ(count(Setting::S3, Owner::Shared), 8);
  EXPECT_EQ(count(Setting::S3, Owner::A), 2);
  EXPECT_EQ(setting_ownership(Setting::S2)[4], Owner::Shared);  // x5
  EXPECT_EQ(setting_ownership(Setting::S2)[8], Owner::B);       // x9
}

TEST(Settings, Coefficients) {
  Rng rng(5);
  const Vector h0 = setting_coefficients(Setting::S2, Hypothesis::H0, LossFamily::logistic(), rng);
  for (int j = 0; j < 12; ++j) EXPECT_EQ(h0[j], j < 8 ? 0.5 : 0.0);
  const Vector p0 = setting_coefficients(Setting::S1, Hypothesis::H0, LossFamily::poisson(), rng);
  EXPECT_EQ(p0[0], 0.1);
  double s2 = 0.0;
  const int reps = 5000;
  for (int r = 0; r < reps; ++r) s2 += setting_coefficients(Setting::S3, Hypothesis::H1, LossFamily::gaussian(), rng).squaredNorm();
  EXPECT_NEAR(s2 / (12.0 * reps), 0.25, 0.01);
}

TEST(Settings, SimulateIsSeededAndAssembles) {
  SimDesign d;
  d.setting = Setting::S3;
  d.n = 100;
  Rng a(6), b(6);
  const SimData s1 = simulate(d, a);
  const SimData s2 = simulate(d, b);
  EXPECT_EQ(s1.data.pooled_design(), s2.data.pooled_design());
  EXPECT_EQ(s1.data.y(), s2.data.y());
  EXPECT_EQ(s1.data.view(Agent::A).cols(), 10);
  EXPECT_EQ(s1.data.view(Agent::B).cols(), 10);
  EXPECT_EQ(agent_columns(s1.data.pooled_design(), s1.data.ownership(), Agent::B), s1.data.view(Agent::B).design);
}

TEST(MapT, DisjointAndShared) {
  const std::vector<Owner> disjoint{Owner::A, Owner::A, Owner::B};
  Vector a(2), b(1);
  a << 1, 2;
  b << 3;
  EXPECT_EQ(map_T(a, b, disjoint), Vector::LinSpaced(3, 1, 3));

  const std::vector<Owner> shared{Owner::A, Owner::Shared, Owner::Shared, Owner::B};
  Vector ba(3), bb(3), expect(4);
  ba << 4, 1, 0;
  bb << 0.5, 2, 7;
  expect << 4, 1.5, 2, 7;
  EXPECT_EQ(map_T(ba, bb, shared), expect);
  EXPECT_THROW(map_T(a, b, shared), Error);
}

TEST(Oracle, GaussianIsNormalEquations) {
  Rng rng(10);
  SimDesign d;
  d.setting = Setting::S1;
  d.n = 500;
  d.fam = LossFamily::gaussian();
  d.hypothesis = Hypothesis::H1;
  const SimData s = simulate(d, rng);
  const Matrix x = s.data.pooled_design();
  const Vector y = s.data.y();
  const FitResult f = oracle_fit(x, y, d.fam);
  const Vector ref = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  EXPECT_LE((f.beta - ref).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Eta, Cases) {
  // orthonormal design: X^T X / n = I
  Matrix q = Matrix::Zero(8, 2);
  q(0, 0) = q(1, 0) = q(2, 0) = q(3, 0) = 1.0;
  q(4, 1) = q(5, 1) = q(6, 1) = q(7, 1) = 1.0;
  q *= std::sqrt(2.0);
  ASSERT_LE((q.transpose() * q / 8.0 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(eta_bound(q, Vector::Zero(8), LossFamily::gaussian(), Vector::Zero(2)), 0.75, 1e-15);

  Matrix h = Matrix::Identity(2, 2);
  double prev = 0.75;
  for (double big : {10.0, 1e2, 1e4}) {
    h(1, 1) = big;
    const double e = eta_from_hessian(h);
    EXPECT_GT(e, prev);
    EXPECT_LT(e, 1.0);
    prev = e;
  }
  EXPECT_GT(prev, 1.0 - 1e-12);
  EXPECT_THROW(eta_from_hessian(Matrix::Zero(2, 2)), Error);
}

TEST(Eta, MatchesPowerIteration) {
  Rng rng(11);
  SimDesign d;
  d.setting = Setting::S1;
  d.n = 500;
  d.fam = LossFamily::gaussian();
  d.hypothesis = Hypothesis::H1;
  const SimData s = simulate(d, rng);
  const Matrix x = s.data.pooled_design();
  const FitResult f = oracle_fit(x, s.data.y(), d.fam);
  const auto [lmax, lmin] = extreme_eigs(x.transpose() * x / 500.0);
  const double r = lmin / lmax;
  EXPECT_NEAR(eta_bound(x, s.data.y(), d.fam, f.beta), 1.0 - r * r * r / 4.0, 1e-8);
}
