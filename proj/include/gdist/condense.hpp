#pragma once

// Synthetic graph construction from a partition: cluster-mean attributes,
// sketched adjacency, and argmax labels.

#include <map>
#include <string>

#include "gdist/cluster.hpp"
#include "gdist/graph.hpp"

namespace gdist {

struct CondensedMeta {
  std::string source;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, std::string> metrics;  // flat key -> value, serialized sorted
};

struct CondensedGraph {
  Matrix x_prime;               // n x d
  Matrix a_prime;               // n x n, symmetric, nonnegative
  std::vector<Index> y_prime;   // one class id per synthetic node
  Index num_classes = 0;
  CondensedMeta meta;

  Index num_nodes() const { return x_prime.rows(); }

  Matrix one_hot() const {
    Matrix y = Matrix::Zero(num_nodes(), num_classes);
    for (Index i = 0; i < num_nodes(); ++i) y(i, y_prime[static_cast<std::size_t>(i)]) = 1.0;
    return y;
  }

  void validate() const {
    require(a_prime.rows() == x_prime.rows() && a_prime.cols() == x_prime.rows(), "A' must be n x n");
    require(static_cast<Index>(y_prime.size()) == x_prime.rows(), "Y' must have one label per synthetic node");
    require((a_prime - a_prime.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "A' must be symmetric");
    require(a_prime.minCoeff() >= 0.0, "A' entries must be nonnegative");
    for (Index y : y_prime) require(y >= 0 && y < num_classes, "Y' label out of range");
  }
};

// C~^T M: row i is the mean of the rows of M in cluster i.
inline Matrix cluster_means(const SparseMatrix& sketch, const Matrix& m) {
  require(sketch.rows() == m.rows(), "sketch has " + std::to_string(sketch.rows()) + " rows but matrix has " +
                                         std::to_string(m.rows()));
  return Matrix(sketch.transpose() * m);
}

// X' = C~^T Z.
inline Matrix condense_attributes(const SparseMatrix& sketch, const Matrix& z) { return cluster_means(sketch, z); }

// H' = C~^T H.
inline Matrix condensed_representations(const SparseMatrix& sketch, const Matrix& h) { return cluster_means(sketch, h); }

// A' = C~^T A C~ (dense).
inline Matrix condense_adjacency(const SparseMatrix& sketch, const SparseGraph& a) {
  require(sketch.rows() == a.num_nodes(), "condense_adjacency: sketch rows must equal node count");
  const SparseMatrix a_sp = SparseMatrix(a.to_eigen());
  const SparseMatrix right = a_sp * sketch;
  return Matrix(Eigen::MatrixXd(sketch.transpose() * right));
}

// Y'_i = argmax_l (C~^T H)_{i,l}; ties go to the lowest class index.
inline std::vector<Index> condense_labels(const SparseMatrix& sketch, const Matrix& h) {
  return argmax_rows(cluster_means(sketch, h));
}

// Zeroes entries below epsilon * max(A'); epsilon = 0 leaves A' unchanged.
inline Matrix sparsify_condensed(const Matrix& a_prime, double epsilon) {
  require(epsilon >= 0.0, "sparsify_condensed: epsilon must be nonnegative");
  if (epsilon == 0.0 || a_prime.size() == 0) return a_prime;
  const double cut = epsilon * a_prime.maxCoeff();
  Matrix out = a_prime;
  // Decide on the upper triangle and mirror so symmetry survives rounding.
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = i; j < out.cols(); ++j)
      if (a_prime(i, j) < cut) out(i, j) = out(j, i) = 0.0;
  return out;
}

}  // namespace gdist
