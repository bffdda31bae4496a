#pragma once

// Planted-partition graphs with Gaussian class-mean features.

#include <algorithm>
#include <numeric>

#include "gdist/graph.hpp"

namespace gdist {

struct SbmSpec {
  Index N = 1000;
  Index K = 4;
  double p = 0.05;   // intra-class edge probability
  double q = 0.005;  // inter-class edge probability
  Index d = 32;
  double separation = 1.0;  // norm of each class mean
  double noise = 2.0;       // per-coordinate standard deviation
  std::uint64_t seed = 0;

  void validate() const {
    require(N > 0 && K >= 1 && K <= N && d > 0, "sbm: N, K, d must be positive with K <= N");
    require(q >= 0.0 && q <= p && p <= 1.0, "sbm: need 0 <= q <= p <= 1");
    require(separation >= 0.0 && noise >= 0.0, "sbm: separation and noise must be nonnegative");
  }
};

// Labels are balanced (node i gets class i mod K). Splits are a seeded 60/20/20
// train/val/test permutation.
inline Dataset generate_sbm(const SbmSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng edge_rng = root.fork(1), feat_rng = root.fork(2), split_rng = root.fork(3);

  Dataset data;
  data.name = "sbm";
  data.num_classes = spec.K;
  data.labels.resize(static_cast<std::size_t>(spec.N));
  for (Index i = 0; i < spec.N; ++i) data.labels[static_cast<std::size_t>(i)] = i % spec.K;

  std::vector<Edge> edges;
  for (Index i = 0; i < spec.N; ++i)
    for (Index j = i + 1; j < spec.N; ++j) {
      const bool same = data.labels[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(j)];
      if (edge_rng.bernoulli(same ? spec.p : spec.q)) edges.push_back({i, j, 1.0});
    }
  data.graph = SparseGraph::from_edges(spec.N, edges);

  Matrix means(spec.K, spec.d);
  for (Index c = 0; c < spec.K; ++c) {
    for (Index j = 0; j < spec.d; ++j) means(c, j) = feat_rng.normal();
    const double norm = means.row(c).norm();
    if (norm > 0.0) means.row(c) *= spec.separation / norm;
  }
  data.features.resize(spec.N, spec.d);
  for (Index i = 0; i < spec.N; ++i)
    for (Index j = 0; j < spec.d; ++j)
      data.features(i, j) = means(data.labels[static_cast<std::size_t>(i)], j) + spec.noise * feat_rng.normal();

  std::vector<Index> order(static_cast<std::size_t>(spec.N));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), split_rng.engine());
  const Index n_train = (spec.N * 6) / 10, n_val = (spec.N * 2) / 10;
  data.splits.assign(static_cast<std::size_t>(spec.N), Split::Test);
  for (Index k = 0; k < spec.N; ++k) {
    const auto node = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
    if (k < n_train) data.splits[node] = Split::Train;
    else if (k < n_train + n_val) data.splits[node] = Split::Val;
  }
  data.validate();
  return data;
}

}  // namespace gdist
