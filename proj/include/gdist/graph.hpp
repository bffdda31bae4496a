#pragma once

// Graph containers and the structural diagnostics computed on them.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "gdist/core.hpp"

namespace gdist {

struct Edge {
  Index u;
  Index v;
  double weight = 1.0;
};

// Undirected graph stored in CSR with both directions of every edge.
//
// `num_edges()` counts each undirected off-diagonal edge once. Derived
// operators (normalized or condensed adjacencies) may carry diagonal entries,
// which are stored once and do not contribute to `num_edges()`.
class SparseGraph {
 public:
  SparseGraph() : row_offsets_(1, 0) {}

  // Builds from an undirected edge list. Self-loops are dropped unless
  // `keep_diagonal` is set; repeated edges keep their first weight.
  static SparseGraph from_edges(Index num_nodes, std::span<const Edge> edges, bool weighted = false,
                                bool keep_diagonal = false) {
    std::vector<std::tuple<Index, Index, double>> triples;
    triples.reserve(edges.size() * 2);
    for (const auto& e : edges) {
      require(e.u >= 0 && e.u < num_nodes && e.v >= 0 && e.v < num_nodes,
              "edge endpoint out of range: " + std::to_string(e.u) + " " + std::to_string(e.v));
      require(e.weight >= 0.0 && std::isfinite(e.weight), "edge weights must be finite and nonnegative");
      if (e.u == e.v) {
        if (keep_diagonal) triples.emplace_back(e.u, e.u, e.weight);
        continue;
      }
      triples.emplace_back(e.u, e.v, e.weight);
      triples.emplace_back(e.v, e.u, e.weight);
    }
    std::stable_sort(triples.begin(), triples.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    triples.erase(std::unique(triples.begin(), triples.end(),
                              [](const auto& a, const auto& b) {
                                return std::get<0>(a) == std::get<0>(b) && std::get<1>(a) == std::get<1>(b);
                              }),
                  triples.end());
    return from_sorted_triples(num_nodes, triples, weighted);
  }

  // Dense symmetric matrix to CSR; exact zeros are not stored.
  static SparseGraph from_dense(const Matrix& dense) {
    require(dense.rows() == dense.cols(), "adjacency must be square");
    std::vector<std::tuple<Index, Index, double>> triples;
    for (Index i = 0; i < dense.rows(); ++i)
      for (Index j = 0; j < dense.cols(); ++j)
        if (dense(i, j) != 0.0) triples.emplace_back(i, j, dense(i, j));
    return from_sorted_triples(dense.rows(), triples, true);
  }

  Index num_nodes() const { return static_cast<Index>(row_offsets_.size()) - 1; }
  Index num_edges() const { return num_edges_; }
  Index num_stored() const { return static_cast<Index>(col_indices_.size()); }
  bool weighted() const { return weighted_; }

  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const Index> neighbors(Index i) const {
    return {col_indices_.data() + row_offsets_[i], static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  std::span<const double> weights(Index i) const {
    return {values_.data() + row_offsets_[i], static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }

  // Weighted degree (row sum).
  double degree(Index i) const {
    double s = 0.0;
    for (double w : weights(i)) s += w;
    return s;
  }
  Vector degrees() const {
    Vector d(num_nodes());
    for (Index i = 0; i < num_nodes(); ++i) d(i) = degree(i);
    return d;
  }

  double weight(Index i, Index j) const {
    auto nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j);
    if (it == nb.end() || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(row_offsets_[i] + (it - nb.begin()))];
  }

  // Undirected off-diagonal edges with u < v in lexicographic order. The
  // position in this list is the edge id used by per-edge operations.
  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(num_edges_));
    for (Index i = 0; i < num_nodes(); ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        if (col_indices_[k] > i) out.push_back({i, col_indices_[k], values_[k]});
    return out;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(num_nodes(), num_nodes());
    for (Index i = 0; i < num_nodes(); ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) d(i, col_indices_[k]) = values_[k];
    return d;
  }

  Eigen::SparseMatrix<double, Eigen::RowMajor> to_eigen() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(col_indices_.size());
    for (Index i = 0; i < num_nodes(); ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) t.emplace_back(i, col_indices_[k], values_[k]);
    Eigen::SparseMatrix<double, Eigen::RowMajor> m(num_nodes(), num_nodes());
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  bool is_symmetric(double tol = 0.0) const {
    for (Index i = 0; i < num_nodes(); ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        if (std::abs(weight(col_indices_[k], i) - values_[k]) > tol) return false;
    return true;
  }

  // Same sparsity pattern with new values (used by normalization).
  SparseGraph with_values(std::vector<double> values) const {
    require(values.size() == values_.size(), "value count mismatch");
    SparseGraph g = *this;
    g.values_ = std::move(values);
    g.weighted_ = true;
    return g;
  }

 private:
  static SparseGraph from_sorted_triples(Index num_nodes, const std::vector<std::tuple<Index, Index, double>>& triples,
                                         bool weighted) {
    SparseGraph g;
    g.weighted_ = weighted;
    g.row_offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    g.col_indices_.reserve(triples.size());
    g.values_.reserve(triples.size());
    for (const auto& [r, c, w] : triples) {
      ++g.row_offsets_[static_cast<std::size_t>(r) + 1];
      g.col_indices_.push_back(c);
      g.values_.push_back(w);
      if (c > r) ++g.num_edges_;
    }
    std::partial_sum(g.row_offsets_.begin(), g.row_offsets_.end(), g.row_offsets_.begin());
    return g;
  }

  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<double> values_;
  Index num_edges_ = 0;
  bool weighted_ = false;
};

// Sparse-dense product A·X.
inline Matrix spmm(const SparseGraph& a, const Matrix& x) {
  require(a.num_nodes() == x.rows(), "spmm: graph has " + std::to_string(a.num_nodes()) + " nodes but matrix has " +
                                         std::to_string(x.rows()) + " rows");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  const auto& off = a.row_offsets();
  const auto& col = a.col_indices();
  const auto& val = a.values();
  for (Index i = 0; i < a.num_nodes(); ++i)
    for (Index k = off[i]; k < off[i + 1]; ++k) out.row(i).noalias() += val[k] * x.row(col[k]);
  return out;
}

// D^{-1/2} A D^{-1/2}; isolated nodes keep all-zero rows and columns.
inline SparseGraph normalized_adjacency(const SparseGraph& graph) {
  const Vector deg = graph.degrees();
  Vector inv_sqrt(deg.size());
  for (Index i = 0; i < deg.size(); ++i) inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  std::vector<double> vals(graph.values().size());
  const auto& off = graph.row_offsets();
  const auto& col = graph.col_indices();
  for (Index i = 0; i < graph.num_nodes(); ++i)
    for (Index k = off[i]; k < off[i + 1]; ++k) vals[k] = graph.values()[k] * inv_sqrt(i) * inv_sqrt(col[k]);
  return graph.with_values(std::move(vals));
}

// Which split a node belongs to. One value per node keeps the masks disjoint.
enum class Split : std::uint8_t { None = 0, Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    default: return "none";
  }
}

struct Dataset {
  std::string name;
  SparseGraph graph;
  Matrix features;            // N x d
  std::vector<Index> labels;  // class id in [0, num_classes)
  std::vector<Split> splits;  // per node
  Index num_classes = 0;

  Index num_nodes() const { return graph.num_nodes(); }

  std::vector<std::uint8_t> mask(Split s) const {
    std::vector<std::uint8_t> m(splits.size());
    for (std::size_t i = 0; i < splits.size(); ++i) m[i] = splits[i] == s ? 1 : 0;
    return m;
  }
  std::vector<Index> nodes_in(Split s) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(static_cast<Index>(i));
    return out;
  }

  // One-hot label matrix Y (N x K).
  Matrix one_hot() const {
    Matrix y = Matrix::Zero(num_nodes(), num_classes);
    for (Index i = 0; i < num_nodes(); ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
    return y;
  }

  void validate() const {
    require(features.rows() == graph.num_nodes(), "feature rows (" + std::to_string(features.rows()) +
                                                      ") must equal node count (" +
                                                      std::to_string(graph.num_nodes()) + ")");
    require(static_cast<Index>(labels.size()) == graph.num_nodes(), "label count must equal node count");
    require(static_cast<Index>(splits.size()) == graph.num_nodes(), "mask length must equal node count");
    require(num_classes >= 1, "need at least one class");
    for (Index y : labels) require(y >= 0 && y < num_classes, "label out of range: " + std::to_string(y));
  }
};

// Subgraph induced on `nodes` (in the given order), carrying features, labels and splits.
inline Dataset induced_subgraph(const Dataset& data, std::span<const Index> nodes) {
  std::vector<Index> remap(static_cast<std::size_t>(data.num_nodes()), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) remap[static_cast<std::size_t>(nodes[k])] = static_cast<Index>(k);
  std::vector<Edge> edges;
  for (const auto& e : data.graph.edge_list()) {
    const Index a = remap[static_cast<std::size_t>(e.u)], b = remap[static_cast<std::size_t>(e.v)];
    if (a >= 0 && b >= 0) edges.push_back({a, b, e.weight});
  }
  Dataset out;
  out.name = data.name;
  out.num_classes = data.num_classes;
  out.graph = SparseGraph::from_edges(static_cast<Index>(nodes.size()), edges, data.graph.weighted());
  out.features.resize(static_cast<Index>(nodes.size()), data.features.cols());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    out.features.row(static_cast<Index>(k)) = data.features.row(nodes[k]);
    out.labels.push_back(data.labels[static_cast<std::size_t>(nodes[k])]);
    out.splits.push_back(data.splits[static_cast<std::size_t>(nodes[k])]);
  }
  return out;
}

// Fraction of undirected edges whose endpoints share a label.
inline double homophily_ratio(const SparseGraph& graph, std::span<const Index> labels) {
  require(static_cast<Index>(labels.size()) == graph.num_nodes(), "labels must cover all nodes");
  if (graph.num_edges() == 0) throw Error("empty edge set");
  Index same = 0;
  for (const auto& e : graph.edge_list())
    if (labels[static_cast<std::size_t>(e.u)] == labels[static_cast<std::size_t>(e.v)]) ++same;
  return static_cast<double>(same) / static_cast<double>(graph.num_edges());
}

// Inter-class attribute distance: mean squared distance between unit-normalized
// attribute rows over ordered pairs with different labels, divided by twice the
// ordered class-pair size product.
//
// Uses per-class sums so the cost is O(N d + K^2 d) rather than O(N^2 d).
inline double icad(const Matrix& features, std::span<const Index> labels, Index num_classes = -1) {
  require(static_cast<Index>(labels.size()) == features.rows(), "labels must cover all rows");
  if (num_classes < 0) num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  const Matrix u = row_normalized(features);
  Matrix class_sum = Matrix::Zero(num_classes, u.cols());
  Vector class_sq = Vector::Zero(num_classes);
  Vector class_size = Vector::Zero(num_classes);
  for (Index i = 0; i < u.rows(); ++i) {
    const Index y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < num_classes, "label out of range");
    class_sum.row(y) += u.row(i);
    class_sq(y) += u.row(i).squaredNorm();
    class_size(y) += 1.0;
  }
  Index nonempty = 0;
  for (Index c = 0; c < num_classes; ++c)
    if (class_size(c) > 0) ++nonempty;
  if (nonempty < 2) throw Error("ICAD undefined: fewer than two nonempty classes");

  double numer = 0.0, pair_sizes = 0.0;
  for (Index x = 0; x < num_classes; ++x)
    for (Index y = 0; y < num_classes; ++y) {
      if (x == y) continue;
      numer += class_size(y) * class_sq(x) + class_size(x) * class_sq(y) - 2.0 * class_sum.row(x).dot(class_sum.row(y));
      pair_sizes += class_size(x) * class_size(y);
    }
  return numer / (2.0 * pair_sizes);
}

// (1-a)||Z-X||_F^2 + a * sum over undirected edges w_ij ||Z_i/sqrt(d_i) - Z_j/sqrt(d_j)||^2.
// For binary graphs w_ij = 1.
inline double gls_objective(const SparseGraph& graph, const Matrix& z, const Matrix& x, double alpha) {
  require(z.rows() == x.rows() && z.cols() == x.cols(), "gls_objective: Z and X shapes differ");
  require(z.rows() == graph.num_nodes(), "gls_objective: row count must equal node count");
  require(alpha >= 0.0 && alpha <= 1.0, "gls_objective: alpha must lie in [0, 1]");
  const Vector deg = graph.degrees();
  double smooth = 0.0;
  for (const auto& e : graph.edge_list()) {
    smooth += e.weight * (z.row(e.u) / std::sqrt(deg(e.u)) - z.row(e.v) / std::sqrt(deg(e.v))).squaredNorm();
  }
  return (1.0 - alpha) * (z - x).squaredNorm() + alpha * smooth;
}

}  // namespace gdist
