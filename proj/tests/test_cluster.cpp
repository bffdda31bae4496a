#include <gtest/gtest.h>

#include "gdist/cluster.hpp"
#include "oracles.hpp"

using namespace gdist;

namespace {

Matrix clouds(Index per, Index k, double spread, std::mt19937_64& gen, std::vector<Index>* truth = nullptr) {
  Matrix pts(per * k, 2);
  std::normal_distribution<double> g(0.0, spread);
  for (Index c = 0; c < k; ++c)
    for (Index i = 0; i < per; ++i) {
      pts(c * per + i, 0) = 10.0 * static_cast<double>(c) + g(gen);
      pts(c * per + i, 1) = g(gen);
      if (truth) truth->push_back(c);
    }
  return pts;
}

// Lowest WCSS over all assignments of `pts` into exactly n nonempty clusters.
double exhaustive_best(const Matrix& pts, Index n) {
  const Index N = pts.rows();
  std::vector<Index> a(static_cast<std::size_t>(N), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<Index> cnt(static_cast<std::size_t>(n), 0);
    for (Index v : a) ++cnt[static_cast<std::size_t>(v)];
    if (std::all_of(cnt.begin(), cnt.end(), [](Index c) { return c > 0; })) {
      const Matrix mu = oracle::cluster_mean_rows(pts, a, n);
      double s = 0;
      for (Index j = 0; j < N; ++j) s += (pts.row(j) - mu.row(a[static_cast<std::size_t>(j)])).squaredNorm();
      best = std::min(best, s);
    }
    Index pos = 0;
    while (pos < N && ++a[static_cast<std::size_t>(pos)] == n) a[static_cast<std::size_t>(pos++)] = 0;
    if (pos == N) break;
  }
  return best;
}

}  // namespace

TEST(Wcss, Examples) {
  Matrix pts(4, 1);
  pts << 0, 2, 10, 12;
  EXPECT_DOUBLE_EQ(wcss(pts, make_clustering({0, 0, 1, 1}, 2)), 4.0);
  EXPECT_DOUBLE_EQ(wcss(pts, make_clustering({0, 0, 0, 0}, 1)), 104.0);
  EXPECT_DOUBLE_EQ(wcss(pts, make_clustering({0, 1, 2, 3}, 4)), 0.0);
}

TEST(Wcss, MatchesScalarReference) {
  std::mt19937_64 gen(1);
  const Matrix pts = oracle::random_matrix(30, 3, gen);
  std::vector<Index> a(30);
  for (Index j = 0; j < 30; ++j) a[static_cast<std::size_t>(j)] = j % 4;
  const Matrix mu = oracle::cluster_mean_rows(pts, a, 4);
  double want = 0;
  for (Index j = 0; j < 30; ++j)
    for (Index c = 0; c < 3; ++c) want += std::pow(pts(j, c) - mu(a[static_cast<std::size_t>(j)], c), 2);
  EXPECT_NEAR(wcss(pts, make_clustering(a, 4)), want, 1e-12);
}

TEST(KMeans, RecoversSeparatedClouds) {
  std::mt19937_64 gen(2);
  std::vector<Index> truth;
  const Matrix pts = clouds(25, 4, 0.5, gen, &truth);
  const Clustering c = kmeans(pts, 4, 0);
  c.validate();
  for (Index s : c.sizes) EXPECT_EQ(s, 25);
  // same partition up to relabeling
  for (Index j = 0; j < pts.rows(); ++j)
    EXPECT_EQ(c.assignment[static_cast<std::size_t>(j)], c.assignment[static_cast<std::size_t>(truth[static_cast<std::size_t>(j)] * 25)]);
}

TEST(KMeans, AsManyClustersAsPointsGivesZeroCost) {
  std::mt19937_64 gen(3);
  const Matrix pts = oracle::random_matrix(12, 3, gen);
  const Clustering c = kmeans(pts, 12, 5);
  EXPECT_NEAR(wcss(pts, c), 0.0, 1e-20);
  for (Index s : c.sizes) EXPECT_EQ(s, 1);
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  Matrix pts = Matrix::Zero(6, 2);
  pts.row(5) << 1, 1;
  const Clustering c = kmeans(pts, 3, 0);
  c.validate();
}

TEST(KMeans, ExhaustiveOptimumOnEightPoints) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 gen(seed + 10);
    const Matrix pts = oracle::random_matrix(8, 2, gen);
    const double best = exhaustive_best(pts, 2);
    EXPECT_LE(wcss(pts, kmeans(pts, 2, seed)), best * (1.0 + 1e-9) + 1e-12) << "seed " << seed;
  }
}

TEST(KMeans, CostNeverIncreasesAcrossIterations) {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix pts = oracle::random_matrix(40, 3, gen);
    KMeansOptions opt;
    opt.n_init = 1;
    opt.tol = 0.0;
    opt.max_iter = 50;
    const Clustering c = kmeans(pts, 5, static_cast<std::uint64_t>(rep), opt);
    ASSERT_FALSE(c.wcss_history.empty());
    EXPECT_LE(c.wcss_history.front(), c.initial_cost + 1e-9);
    for (std::size_t t = 1; t < c.wcss_history.size(); ++t)
      EXPECT_LE(c.wcss_history[t], c.wcss_history[t - 1] + 1e-9);
    EXPECT_NEAR(c.wcss_history.back(), wcss(pts, c), 1e-9);
  }
}

TEST(KMeans, RestartsNeverWorseThanFirst) {
  std::mt19937_64 gen(5);
  const Matrix pts = oracle::random_matrix(60, 2, gen);
  KMeansOptions one;
  one.n_init = 1;
  KMeansOptions many;
  many.n_init = 10;
  EXPECT_LE(wcss(pts, kmeans(pts, 6, 9, many)), wcss(pts, kmeans(pts, 6, 9, one)) + 1e-12);
}

TEST(KMeans, Deterministic) {
  std::mt19937_64 gen(6);
  const Matrix pts = oracle::random_matrix(50, 3, gen);
  EXPECT_EQ(kmeans(pts, 4, 17).assignment, kmeans(pts, 4, 17).assignment);
  KMeansOptions opt;
  opt.batch_size = 10;
  EXPECT_EQ(minibatch_kmeans(pts, 4, 17, opt).assignment, minibatch_kmeans(pts, 4, 17, opt).assignment);
}

TEST(KMeans, InvalidClusterCounts) {
  const Matrix pts = Matrix::Zero(3, 2);
  EXPECT_THROW(kmeans(pts, 4, 0), ShapeError);
  EXPECT_THROW(kmeans(pts, 0, 0), ShapeError);
  EXPECT_THROW(minibatch_kmeans(pts, 4, 0), ShapeError);
}

TEST(MiniBatch, FullBatchEqualsLloyd) {
  std::mt19937_64 gen(7);
  const Matrix pts = oracle::random_matrix(30, 2, gen);
  KMeansOptions opt;
  opt.batch_size = 30;
  EXPECT_EQ(minibatch_kmeans(pts, 3, 4, opt).assignment, kmeans(pts, 3, 4, opt).assignment);
}

TEST(MiniBatch, CloseToLloydCost) {
  std::mt19937_64 gen(8);
  const Matrix pts = clouds(200, 5, 1.0, gen);
  KMeansOptions opt;
  opt.batch_size = 100;
  const double full = wcss(pts, kmeans(pts, 5, 1));
  const Clustering mb = minibatch_kmeans(pts, 5, 1, opt);
  mb.validate();
  EXPECT_LE(wcss(pts, mb), 1.1 * full);
}

TEST(Sketching, MembershipAndColumnSums) {
  const Clustering c = make_clustering({0, 1, 0, 2, 0}, 3);
  const SketchingMatrices s = sketching_matrices(c);
  const Eigen::MatrixXd m(s.membership), k(s.sketch);
  EXPECT_EQ(m.rows(), 5);
  EXPECT_EQ(m.cols(), 3);
  EXPECT_DOUBLE_EQ(m(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(2, 1), 0.0);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(k(3, 2), 1.0);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(k.col(i).sum(), 1.0, 1e-12);
  for (Index j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(m.row(j).sum(), 1.0);
}

TEST(Sketching, ColumnSumsOnRandomPartitions) {
  std::mt19937_64 gen(9);
  for (int rep = 0; rep < 20; ++rep) {
    const Index N = 50 + rep, n = 1 + rep % 13;
    std::vector<Index> a(static_cast<std::size_t>(N));
    for (Index j = 0; j < N; ++j) a[static_cast<std::size_t>(j)] = j < n ? j : std::uniform_int_distribution<Index>(0, n - 1)(gen);
    const Eigen::MatrixXd k(sketching_matrices(make_clustering(a, n)).sketch);
    for (Index i = 0; i < n; ++i) EXPECT_NEAR(k.col(i).sum(), 1.0, 1e-12);
  }
}

TEST(Sketching, EmptyClusterRejected) {
  EXPECT_THROW(sketching_matrices(make_clustering({0, 0, 2}, 3)), ShapeError);
}
