#include <gtest/gtest.h>

#include "gdist/fid.hpp"
#include "oracles.hpp"

using namespace gdist;

namespace {

std::vector<Index> random_partition(Index N, Index n, std::mt19937_64& gen) {
  std::vector<Index> a(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) a[static_cast<std::size_t>(j)] = j < n ? j : std::uniform_int_distribution<Index>(0, n - 1)(gen);
  std::shuffle(a.begin(), a.end(), gen);
  return a;
}

}  // namespace

TEST(GaussianStats, TwoPointExample) {
  Matrix h(2, 2);
  h << 1, 0, 3, 0;
  const GaussianStats s = gaussian_stats(h, false);
  EXPECT_DOUBLE_EQ(s.mu(0), 2.0);
  EXPECT_DOUBLE_EQ(s.sigma(0, 0), 1.0);  // biased estimator
  EXPECT_DOUBLE_EQ(s.sigma(1, 1), 0.0);
  const GaussianStats n = gaussian_stats(h, true);
  EXPECT_DOUBLE_EQ(n.mu(0), 1.0);
  EXPECT_DOUBLE_EQ(n.sigma(0, 0), 0.0);
}

TEST(GaussianStats, SingleRowThrows) { EXPECT_THROW(gaussian_stats(Matrix::Ones(1, 3)), ShapeError); }

TEST(GaussianStats, MatchesTwoPassReference) {
  std::mt19937_64 gen(1);
  const Matrix h = oracle::random_matrix(25, 4, gen, 2.0);
  const GaussianStats s = gaussian_stats(h, false);
  for (Index a = 0; a < 4; ++a) {
    double m = 0;
    for (Index i = 0; i < 25; ++i) m += h(i, a) / 25.0;
    EXPECT_NEAR(s.mu(a), m, 1e-13);
  }
  for (Index a = 0; a < 4; ++a)
    for (Index b = 0; b < 4; ++b) {
      double c = 0;
      for (Index i = 0; i < 25; ++i) c += (h(i, a) - s.mu(a)) * (h(i, b) - s.mu(b)) / 25.0;
      EXPECT_NEAR(s.sigma(a, b), c, 1e-12);
    }
}

TEST(Fid, SelfDistanceIsZero) {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 10; ++rep) {
    const GaussianStats s = gaussian_stats(oracle::random_matrix(30, 6, gen));
    EXPECT_LE(std::abs(fid(s, s)), 1e-8);
  }
}

TEST(Fid, Symmetric) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 10; ++rep) {
    const GaussianStats a = gaussian_stats(oracle::random_matrix(30, 5, gen));
    const GaussianStats b = gaussian_stats(oracle::random_matrix(12, 5, gen, 3.0));
    EXPECT_LE(std::abs(fid(a, b) - fid(b, a)), 1e-8);
    EXPECT_GE(fid(a, b), 0.0);
  }
}

TEST(Fid, OneDimensionalClosedForm) {
  GaussianStats a{Vector::Constant(1, 1.5), Matrix::Constant(1, 1, 4.0)};
  GaussianStats b{Vector::Constant(1, -0.5), Matrix::Constant(1, 1, 0.25)};
  // (m1 - m2)^2 + (s1 - s2)^2
  EXPECT_NEAR(fid(a, b), 4.0 + 1.5 * 1.5, 1e-10);
}

TEST(Fid, DiagonalClosedForm) {
  Matrix sa = Matrix::Zero(3, 3), sb = Matrix::Zero(3, 3);
  sa.diagonal() << 1, 4, 9;
  sb.diagonal() << 4, 4, 1;
  const GaussianStats a{Vector::Zero(3), sa}, b{Vector::Ones(3), sb};
  EXPECT_NEAR(fid(a, b), 3.0 + 1.0 + 0.0 + 4.0, 1e-10);
}

TEST(Fid, MatchesJacobiOracleInFourDimensions) {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix ha = oracle::random_matrix(40, 4, gen);
    Matrix hb = oracle::random_matrix(25, 4, gen, 0.7);
    hb.col(0).array() += 0.5;
    const double got = fid(gaussian_stats(ha, false), gaussian_stats(hb, false));
    EXPECT_NEAR(got, oracle::frechet(ha, hb), 1e-8);
  }
}

TEST(TraceSqrt, Examples) {
  const Matrix i3 = Matrix::Identity(3, 3);
  EXPECT_NEAR(trace_sqrt_product(i3, i3), 3.0, 1e-12);
  EXPECT_NEAR(trace_sqrt_product(4.0 * i3, i3), 6.0, 1e-12);
  EXPECT_NEAR(trace_sqrt_product(i3, Matrix::Zero(3, 3)), 0.0, 1e-12);
}

TEST(TraceSqrt, RejectsIndefinite) {
  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = -1e-3;
  EXPECT_THROW(trace_sqrt_product(bad, Matrix::Identity(2, 2)), Error);
  EXPECT_THROW(trace_sqrt_product(Matrix::Identity(2, 2), bad), Error);
  EXPECT_THROW(trace_sqrt_product(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), ShapeError);
}

TEST(TraceSqrt, MatchesJacobiOracle) {
  std::mt19937_64 gen(5);
  const Matrix x = oracle::random_matrix(10, 5, gen), y = oracle::random_matrix(10, 5, gen);
  const Matrix a = x.transpose() * x, b = y.transpose() * y;
  const Matrix r = oracle::psd_sqrt(a);
  const oracle::EigenPair e = oracle::jacobi(r * b * r);
  double want = 0;
  for (Index i = 0; i < 5; ++i) want += std::sqrt(std::max(0.0, e.values(i)));
  EXPECT_NEAR(trace_sqrt_product(a, b), want, 1e-8 * want);
}

TEST(Theorem1Bound, Examples) {
  EXPECT_DOUBLE_EQ(theorem1_bound(make_clustering({0, 0, 1, 1}, 2)), 0.0);
  // sizes {1, 3}, N = 4: ((2-1)^2 + (2-3)^2) / 16
  EXPECT_DOUBLE_EQ(theorem1_bound(make_clustering({0, 1, 1, 1}, 2)), 0.125);
  EXPECT_DOUBLE_EQ(theorem1_bound(make_clustering({0, 0, 0}, 1)), 0.0);
}

TEST(Theorem2Bound, SingletonClustersExample) {
  // n = N: H' = H, c_max = c_min = 1, within = 0, mean shift 0 -> 2 tr(Sigma)
  Matrix h(2, 1);
  h << 1, -1;
  const GaussianStats s = gaussian_stats(h, false);
  const Clustering c = make_clustering({0, 1}, 2);
  EXPECT_DOUBLE_EQ(theorem2_bound(h, h, c, s, 0.0), 2.0 * s.sigma.trace());
}

TEST(Theorem2Bound, HoldsOnRandomInstances) {
  std::mt19937_64 gen(6);
  Index violations = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index N = 5 + rep % 76, d = 1 + rep % 10, n = 2 + rep % std::min<Index>(N - 1, 9);
    const Matrix h = oracle::normalize_rows(oracle::random_matrix(N, d, gen));
    const auto a = random_partition(N, n, gen);
    const Clustering c = make_clustering(a, n, h);
    const Matrix hp = oracle::cluster_mean_rows(h, a, n);
    const GaussianStats so = gaussian_stats(h, false), ss = gaussian_stats(hp, false);
    const double shift = (so.mu - ss.mu).squaredNorm();
    const double lhs = fid_covariance_term(so, ss);
    if (lhs > theorem2_bound(h, hp, c, so, shift) + 1e-12) ++violations;
  }
  EXPECT_EQ(violations, 0);
}
