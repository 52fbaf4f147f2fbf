#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "nwband/errors.hpp"
#include "nwband/psd_matrix.hpp"

using namespace nwband;

TEST(HalfVec, SizeAndOrdering) {
  EXPECT_EQ(halfvec_size(1), 1);
  EXPECT_EQ(halfvec_size(4), 10);
  // h11 h22 h33 h21 h31 h32
  EXPECT_EQ(halfvec_index(3, 0, 0), 0);
  EXPECT_EQ(halfvec_index(3, 2, 2), 2);
  EXPECT_EQ(halfvec_index(3, 1, 0), 3);
  EXPECT_EQ(halfvec_index(3, 2, 0), 4);
  EXPECT_EQ(halfvec_index(3, 2, 1), 5);
  EXPECT_EQ(halfvec_index(3, 0, 2), 4);
}

TEST(HalfVec, IndicesCoverEveryEntryOnce) {
  for (int p = 1; p <= 9; ++p) {
    std::vector<int> seen(static_cast<std::size_t>(halfvec_size(p)), 0);
    for (int u = 0; u < p; ++u)
      for (int v = 0; v <= u; ++v) ++seen[static_cast<std::size_t>(halfvec_index(p, u, v))];
    for (int c : seen) EXPECT_EQ(c, 1);
  }
}

TEST(SymmetricBandwidth, DenseIsSymmetric) {
  Vector hv(6);
  hv << 1, 2, 3, 4, 5, 6;
  const SymmetricBandwidth h(3, hv);
  const Matrix d = h.dense();
  EXPECT_EQ(d, d.transpose());
  EXPECT_EQ(d(1, 0), 4);
  EXPECT_EQ(d(2, 0), 5);
  EXPECT_EQ(d(2, 1), 6);
}

TEST(SymmetricBandwidth, RoundTrip) {
  std::mt19937_64 rng(3);
  for (int p = 1; p <= 8; ++p) {
    const Matrix a = oracle::random_symmetric(p, rng);
    const SymmetricBandwidth h = SymmetricBandwidth::from_dense(a);
    EXPECT_EQ(SymmetricBandwidth::from_dense(h.dense()), h);
    EXPECT_EQ(h.dense(), a);
  }
}

TEST(SymmetricBandwidth, RejectsBadShapes) {
  EXPECT_THROW(SymmetricBandwidth(0), InvalidInput);
  EXPECT_THROW(SymmetricBandwidth(3, Vector::Zero(5)), InvalidInput);
  EXPECT_THROW(SymmetricBandwidth::from_dense(Matrix::Zero(2, 3)), InvalidInput);
}

TEST(FrobeniusNorm, Examples) {
  EXPECT_NEAR(frobenius_norm(SymmetricBandwidth::scaled_identity(3, 1.0)), std::sqrt(3.0), 1e-15);
  EXPECT_EQ(frobenius_norm(SymmetricBandwidth(5)), 0.0);
  Vector hv(3);
  hv << 1, 2, 3;
  const SymmetricBandwidth h(2, hv);
  // Dense reference: sqrt of the sum of squared entries of [[1,3],[3,2]].
  Matrix d(2, 2);
  d << 1, 3, 3, 2;
  EXPECT_NEAR(frobenius_norm(h), std::sqrt(d.array().square().sum()), 1e-15);
  EXPECT_NEAR(frobenius_norm(h), std::sqrt(23.0), 1e-15);
}

TEST(FrobeniusNorm, MatchesDenseNorm) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const int p = 1 + t % 10;
    const Matrix a = oracle::random_symmetric(p, rng, 3.0);
    const double ref = a.norm();
    EXPECT_LE(std::abs(frobenius_norm(SymmetricBandwidth::from_dense(a)) - ref), 1e-12 * ref);
  }
}

TEST(FeasibleSet, Membership) {
  const FeasibleSet set(2, 1.0);
  EXPECT_TRUE(set.contains(SymmetricBandwidth(2)));
  EXPECT_TRUE(set.contains(SymmetricBandwidth::from_dense(Matrix::Identity(2, 2) / std::sqrt(2.0))));
  EXPECT_FALSE(set.contains(SymmetricBandwidth::scaled_identity(2, 1.0)));
  Matrix neg(2, 2);
  neg << 0.5, 0, 0, -1e-6;
  EXPECT_FALSE(set.contains(SymmetricBandwidth::from_dense(neg)));
  neg(1, 1) = -1e-11;
  EXPECT_TRUE(set.contains(SymmetricBandwidth::from_dense(neg)));
  EXPECT_THROW(FeasibleSet(2, 0.0), InvalidInput);
  EXPECT_THROW(FeasibleSet(0, 1.0), InvalidInput);
}

TEST(FeasibleSet, Diameter) {
  EXPECT_DOUBLE_EQ(FeasibleSet(1, 2.0).diameter(), 2.0);
  EXPECT_DOUBLE_EQ(FeasibleSet(3, 2.0).diameter(), 2.0 * std::sqrt(2.0));
}

TEST(Project, FeasiblePointUnchanged) {
  Matrix a(2, 2);
  a << 2, 0.5, 0.5, 1;
  const auto r = project_with_info(a, FeasibleSet(2, 10.0));
  EXPECT_LT((r.value.dense() - a).norm(), 1e-12);
  EXPECT_FALSE(r.active);
}

TEST(Project, ClampsNegativeEigenvalue) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = -1;
  a(1, 1) = 2;
  const auto r = project_with_info(a, FeasibleSet(2, 10.0));
  Matrix expect = Matrix::Zero(2, 2);
  expect(1, 1) = 2;
  EXPECT_LT((r.value.dense() - expect).norm(), 1e-12);
  EXPECT_TRUE(r.active);
}

TEST(Project, RadialScalingMatchesGridSearch) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 3;
  a(1, 1) = 4;
  const Matrix got = project(a, FeasibleSet(2, 1.0)).dense();
  EXPECT_NEAR(got(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(got(1, 1), 0.8, 1e-12);
  EXPECT_NEAR(got(1, 0), 0.0, 1e-12);

  // Closest feasible diagonal matrix by dense search over the quarter disc.
  double best = 1e300;
  double bx = 0;
  double by = 0;
  const int steps = 2000;
  for (int i = 0; i <= steps; ++i) {
    const double th = 0.5 * M_PI * i / steps;
    const double x = std::cos(th);
    const double y = std::sin(th);
    const double d = (x - 3) * (x - 3) + (y - 4) * (y - 4);
    if (d < best) {
      best = d;
      bx = x;
      by = y;
    }
  }
  EXPECT_NEAR(got(0, 0), bx, 1e-3);
  EXPECT_NEAR(got(1, 1), by, 1e-3);
}

TEST(Project, ZeroStaysZero) {
  const auto r = project_with_info(Matrix::Zero(3, 3), FeasibleSet(3, 1.0));
  EXPECT_EQ(r.value, SymmetricBandwidth(3));
  EXPECT_FALSE(r.active);
}

TEST(Project, RejectsNonFiniteAndMismatch) {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = std::nan("");
  EXPECT_THROW(project(a, FeasibleSet(2, 1.0)), InvalidInput);
  EXPECT_THROW(project(Matrix::Identity(3, 3), FeasibleSet(2, 1.0)), InvalidInput);
}

TEST(Project, SymmetrizesInput) {
  Matrix a(2, 2);
  a << 1, 1, 0, 1;
  const Matrix got = project(a, FeasibleSet(2, 100.0)).dense();
  EXPECT_NEAR(got(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(got(1, 0), 0.5, 1e-12);
}

TEST(Project, AgreesWithIndependentProjection) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const int p = 1 + t % 8;
    const double radius = 0.5 + t % 5;
    const Matrix a = oracle::random_symmetric(p, rng, 2.0);
    const Matrix got = project(a, FeasibleSet(p, radius)).dense();
    EXPECT_LT((got - oracle::project(a, radius)).norm(), 1e-9) << "p=" << p;
  }
}

TEST(ProjectProperties, IdempotentFeasibleNonExpansive) {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> dim(1, 10);
  std::uniform_real_distribution<double> rad(0.1, 20.0);
  for (int t = 0; t < 300; ++t) {
    const int p = dim(rng);
    const FeasibleSet set(p, rad(rng));
    const Matrix a = oracle::random_symmetric(p, rng, 3.0);
    const Matrix b = oracle::random_symmetric(p, rng, 3.0);
    const SymmetricBandwidth pa = project(a, set);
    const SymmetricBandwidth pb = project(b, set);
    EXPECT_TRUE(set.contains(pa));
    EXPECT_GE(min_eigenvalue(pa), -kPsdSlack);
    EXPECT_LE((project(pa.dense(), set).dense() - pa.dense()).norm(), 1e-10);
    EXPECT_LE((pa.dense() - pb.dense()).norm(), (a - b).norm() + 1e-10);
  }
}
