#pragma once

// K-Means (Lloyd and mini-batch), within-cluster sum of squares, and the
// membership / sketching matrices of a partition.

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/SparseCore>

#include "gdist/core.hpp"

namespace gdist {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct Clustering {
  std::vector<Index> assignment;  // node -> cluster id in [0, n)
  Index n = 0;
  std::vector<Index> sizes;
  Matrix centroids;  // n x dim, the cluster means of `assignment`

  // Diagnostics of the run that produced this partition.
  Index iterations = 0;
  double initial_cost = 0.0;          // cost of the first assignment against the seeded centers
  std::vector<double> wcss_history;  // WCSS after each assignment step

  Index num_points() const { return static_cast<Index>(assignment.size()); }
  Index max_size() const { return *std::max_element(sizes.begin(), sizes.end()); }
  Index min_size() const { return *std::min_element(sizes.begin(), sizes.end()); }

  void validate() const {
    require(static_cast<Index>(sizes.size()) == n, "cluster size vector length must equal n");
    Index total = 0;
    for (Index s : sizes) {
      require(s >= 1, "every cluster must be nonempty");
      total += s;
    }
    require(total == num_points(), "cluster sizes must sum to the point count");
    for (Index a : assignment) require(a >= 0 && a < n, "assignment id out of range");
  }
};

// Partition from an explicit assignment; centroids are the cluster means of `points`
// (left empty when `points` has no rows).
inline Clustering make_clustering(std::vector<Index> assignment, Index n, const Matrix& points = Matrix()) {
  Clustering c;
  c.assignment = std::move(assignment);
  c.n = n;
  c.sizes.assign(static_cast<std::size_t>(n), 0);
  for (Index a : c.assignment) {
    require(a >= 0 && a < n, "assignment id out of range");
    ++c.sizes[static_cast<std::size_t>(a)];
  }
  if (points.rows() > 0) {
    require(points.rows() == c.num_points(), "points must match the assignment length");
    c.centroids = Matrix::Zero(n, points.cols());
    for (Index j = 0; j < points.rows(); ++j) c.centroids.row(c.assignment[static_cast<std::size_t>(j)]) += points.row(j);
    for (Index i = 0; i < n; ++i)
      if (c.sizes[static_cast<std::size_t>(i)] > 0) c.centroids.row(i) /= static_cast<double>(c.sizes[static_cast<std::size_t>(i)]);
  }
  return c;
}

// sum_i sum_{j in C_i} ||H_j - mean(C_i)||^2, means recomputed from the assignment.
inline double wcss(const Matrix& points, const Clustering& clustering) {
  require(points.rows() == clustering.num_points(), "wcss: point count must match the assignment");
  const Clustering means = make_clustering(clustering.assignment, clustering.n, points);
  double total = 0.0;
  for (Index j = 0; j < points.rows(); ++j)
    total += (points.row(j) - means.centroids.row(clustering.assignment[static_cast<std::size_t>(j)])).squaredNorm();
  return total;
}

struct KMeansOptions {
  Index max_iter = 300;       // E2
  double tol = 1e-4;          // stop when the squared centroid shift drops below this
  Index n_init = 10;          // independent k-means++ restarts; lowest WCSS wins
  Index batch_size = 1000;    // mini-batch only
};

namespace detail {

inline void nearest_center(const Matrix& points, const Matrix& centers, std::vector<Index>& assign,
                           std::vector<double>& dist) {
  assign.resize(static_cast<std::size_t>(points.rows()));
  dist.resize(static_cast<std::size_t>(points.rows()));
  for (Index j = 0; j < points.rows(); ++j) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centers.rows(); ++c) {
      const double d = (points.row(j) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assign[static_cast<std::size_t>(j)] = best;
    dist[static_cast<std::size_t>(j)] = best_d;
  }
}

inline Matrix kmeans_plus_plus(const Matrix& points, Index n, Rng& rng) {
  const Index N = points.rows();
  Matrix centers(n, points.cols());
  centers.row(0) = points.row(rng.index(N));
  std::vector<double> d2(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) d2[static_cast<std::size_t>(j)] = (points.row(j) - centers.row(0)).squaredNorm();
  for (Index c = 1; c < n; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Index pick = N - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (Index j = 0; j < N; ++j) {
        r -= d2[static_cast<std::size_t>(j)];
        if (r < 0.0) {
          pick = j;
          break;
        }
      }
    } else {
      pick = rng.index(N);
    }
    centers.row(c) = points.row(pick);
    for (Index j = 0; j < N; ++j)
      d2[static_cast<std::size_t>(j)] = std::min(d2[static_cast<std::size_t>(j)], (points.row(j) - centers.row(c)).squaredNorm());
  }
  return centers;
}

// Moves the point farthest from its center (among clusters with more than one
// member) into each empty cluster. Never increases WCSS.
inline void repair_empty(const Matrix& points, Index n, std::vector<Index>& assign, std::vector<double>& dist,
                         Matrix& centers) {
  std::vector<Index> sizes(static_cast<std::size_t>(n), 0);
  for (Index a : assign) ++sizes[static_cast<std::size_t>(a)];
  for (Index c = 0; c < n; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) continue;
    Index far = -1;
    for (Index j = 0; j < points.rows(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (sizes[static_cast<std::size_t>(assign[ju])] < 2) continue;
      if (far < 0 || dist[ju] > dist[static_cast<std::size_t>(far)]) far = j;
    }
    require(far >= 0, "kmeans: cannot repair empty cluster");
    --sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
    assign[static_cast<std::size_t>(far)] = c;
    dist[static_cast<std::size_t>(far)] = 0.0;
    sizes[static_cast<std::size_t>(c)] = 1;
    centers.row(c) = points.row(far);
  }
}

inline void check_kmeans_args(const Matrix& points, Index n) {
  if (n <= 0) throw ShapeError("kmeans: cluster count must be positive");
  if (n > points.rows())
    throw ShapeError("kmeans: cluster count " + std::to_string(n) + " exceeds point count " + std::to_string(points.rows()));
  require(points.allFinite(), "kmeans: points must be finite");
}

inline Clustering lloyd_once(const Matrix& points, Index n, Rng& rng, const KMeansOptions& opt) {
  Matrix centers = kmeans_plus_plus(points, n, rng);
  std::vector<Index> assign;
  std::vector<double> dist;
  std::vector<double> history;
  double initial_cost = 0.0;
  Index iter = 0;
  while (true) {
    nearest_center(points, centers, assign, dist);
    if (iter == 0)
      for (double d : dist) initial_cost += d;
    repair_empty(points, n, assign, dist, centers);
    Clustering step = make_clustering(assign, n, points);
    history.push_back(wcss(points, step));
    ++iter;
    const double shift = (step.centroids - centers).squaredNorm();
    centers = std::move(step.centroids);
    if (shift < opt.tol || iter >= opt.max_iter) break;
  }
  Clustering out = make_clustering(std::move(assign), n, points);
  out.iterations = iter;
  out.initial_cost = initial_cost;
  out.wcss_history = std::move(history);
  return out;
}

inline Clustering minibatch_once(const Matrix& points, Index n, Rng& rng, const KMeansOptions& opt) {
  const Index N = points.rows();
  Matrix centers = kmeans_plus_plus(points, n, rng);
  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> order(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) order[static_cast<std::size_t>(j)] = j;
  std::vector<Index> assign;
  std::vector<double> dist;
  Matrix batch(opt.batch_size, points.cols());
  Index iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    for (Index k = 0; k < opt.batch_size; ++k) {
      const Index pick = k + rng.index(N - k);
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(pick)]);
      batch.row(k) = points.row(order[static_cast<std::size_t>(k)]);
    }
    nearest_center(batch, centers, assign, dist);
    const Matrix before = centers;
    for (Index k = 0; k < opt.batch_size; ++k) {
      const Index c = assign[static_cast<std::size_t>(k)];
      counts[static_cast<std::size_t>(c)] += 1.0;
      centers.row(c) += (batch.row(k) - centers.row(c)) / counts[static_cast<std::size_t>(c)];
    }
    if ((centers - before).squaredNorm() < opt.tol) {
      ++iter;
      break;
    }
  }
  nearest_center(points, centers, assign, dist);
  repair_empty(points, n, assign, dist, centers);
  Clustering out = make_clustering(std::move(assign), n, points);
  out.iterations = iter;
  out.wcss_history.push_back(wcss(points, out));
  return out;
}

template <class Once>
Clustering best_of_restarts(const Matrix& points, Index n, std::uint64_t seed, const KMeansOptions& opt, Once&& once) {
  require(opt.n_init >= 1, "kmeans: n_init must be at least 1");
  Rng rng(seed);
  Clustering best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < opt.n_init; ++r) {
    Clustering c = once(points, n, rng, opt);
    const double cost = c.wcss_history.back();
    if (cost < best_cost) {
      best_cost = cost;
      best = std::move(c);
    }
  }
  return best;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Ties in the assignment step go to
// the lowest cluster index; empty clusters take the point farthest from its center.
inline Clustering kmeans(const Matrix& points, Index n, std::uint64_t seed, const KMeansOptions& opt = {}) {
  detail::check_kmeans_args(points, n);
  return detail::best_of_restarts(points, n, seed, opt, detail::lloyd_once);
}

// Mini-batch K-Means with per-center learning rate 1/count. Degenerates to
// `kmeans` when the batch covers every point.
inline Clustering minibatch_kmeans(const Matrix& points, Index n, std::uint64_t seed, const KMeansOptions& opt = {}) {
  detail::check_kmeans_args(points, n);
  require(opt.batch_size >= 1, "minibatch_kmeans: batch size must be positive");
  if (opt.batch_size >= points.rows()) return kmeans(points, n, seed, opt);
  return detail::best_of_restarts(points, n, seed, opt, detail::minibatch_once);
}

struct SketchingMatrices {
  SparseMatrix membership;  // C, N x n, 0/1
  SparseMatrix sketch;      // C~ = C diag(1C)^{-1}
};

inline SketchingMatrices sketching_matrices(const Clustering& clustering) {
  clustering.validate();
  std::vector<Eigen::Triplet<double>> ones, scaled;
  for (Index j = 0; j < clustering.num_points(); ++j) {
    const Index c = clustering.assignment[static_cast<std::size_t>(j)];
    ones.emplace_back(j, c, 1.0);
    scaled.emplace_back(j, c, 1.0 / static_cast<double>(clustering.sizes[static_cast<std::size_t>(c)]));
  }
  SketchingMatrices out{SparseMatrix(clustering.num_points(), clustering.n),
                        SparseMatrix(clustering.num_points(), clustering.n)};
  out.membership.setFromTriplets(ones.begin(), ones.end());
  out.sketch.setFromTriplets(scaled.begin(), scaled.end());
  return out;
}

}  // namespace gdist
