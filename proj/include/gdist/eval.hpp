#pragma once

// Two-layer graph convolutional evaluator (train on a condensed graph, test on
// the original) and the Random / K-Center / Herding coreset baselines.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gdist/condense.hpp"
#include "gdist/model.hpp"

namespace gdist {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I.
inline RowSparse renormalize(const RowSparse& a) {
  require(a.rows() == a.cols(), "renormalize: adjacency must be square");
  const Index n = a.rows();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() + n));
  Vector deg = Vector::Ones(n);
  for (Index i = 0; i < n; ++i)
    for (RowSparse::InnerIterator it(a, i); it; ++it) deg(i) += it.value();
  for (Index i = 0; i < n; ++i) {
    require(deg(i) > 0.0, "renormalize: nonpositive degree at node " + std::to_string(i));
    deg(i) = 1.0 / std::sqrt(deg(i));
  }
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, deg(i) * deg(i));
    for (RowSparse::InnerIterator it(a, i); it; ++it) t.emplace_back(i, it.col(), it.value() * deg(i) * deg(it.col()));
  }
  RowSparse out(n, n);
  out.setFromTriplets(t.begin(), t.end());  // duplicates (explicit diagonal entries) are summed
  return out;
}

inline RowSparse renormalize(const SparseGraph& g) { return renormalize(RowSparse(g.to_eigen())); }
inline RowSparse renormalize(const Matrix& dense) { return renormalize(RowSparse(dense.sparseView())); }

// A X for row-major sparse A and row-major dense X, accumulating whole rows.
inline Matrix sparse_dense(const RowSparse& a, const Matrix& x) {
  require(a.cols() == x.rows(), "sparse_dense: shape mismatch");
  Matrix out = Matrix::Zero(a.rows(), x.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (RowSparse::InnerIterator it(a, i); it; ++it) out.row(i).noalias() += it.value() * x.row(it.col());
  return out;
}

struct GCNParams {
  Matrix w1, b1;  // d x hidden, 1 x hidden
  Matrix w2, b2;  // hidden x K, 1 x K
  double dropout = 0.5;

  Index hidden_dim() const { return w1.cols(); }

  std::vector<Matrix*> parameters() { return {&w1, &b1, &w2, &b2}; }
  std::vector<const Matrix*> parameters() const { return {&w1, &b1, &w2, &b2}; }

  void validate() const {
    require(w1.cols() == w2.rows() && b1.cols() == w1.cols() && b2.cols() == w2.cols() && b1.rows() == 1 &&
                b2.rows() == 1,
            "GCN dims must chain d -> hidden -> K");
  }
};

inline GCNParams init_gcn(Index input_dim, Index hidden_dim, Index num_classes, double dropout, Rng& rng) {
  // Glorot-uniform weights, zero biases.
  auto glorot = [&](Index in, Index out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    return w;
  };
  GCNParams p;
  p.w1 = glorot(input_dim, hidden_dim);
  p.b1 = Matrix::Zero(1, hidden_dim);
  p.w2 = glorot(hidden_dim, num_classes);
  p.b2 = Matrix::Zero(1, num_classes);
  p.dropout = dropout;
  return p;
}

struct GCNCache {
  Matrix ax;    // A_hat X
  Matrix pre;   // A_hat X W1 + b1
  Matrix hid;   // relu(pre) after dropout
  Matrix mask;  // scaled dropout mask, empty when inactive
  Matrix ah;    // A_hat hid
};

// layer2(A_hat relu(layer1(A_hat X))), dropout on the hidden activations in train mode.
// `ax` may carry a precomputed A_hat X.
inline Matrix gcn_forward(const GCNParams& p, const RowSparse& a_hat, const Matrix& x, bool train_mode = false,
                          Rng* rng = nullptr, GCNCache* cache = nullptr, const Matrix* ax = nullptr) {
  require(a_hat.rows() == x.rows() && x.cols() == p.w1.rows(), "gcn_forward: shape mismatch");
  GCNCache local;
  GCNCache& c = cache ? *cache : local;
  c.ax = ax ? *ax : sparse_dense(a_hat, x);
  c.pre = c.ax * p.w1;
  c.pre.rowwise() += p.b1.row(0);
  c.hid = c.pre.cwiseMax(0.0);
  c.mask.resize(0, 0);
  if (train_mode && p.dropout > 0.0) {
    require(rng != nullptr, "gcn_forward: train-mode dropout needs a random source");
    const double keep = 1.0 - p.dropout;
    c.mask.resize(c.hid.rows(), c.hid.cols());
    for (Index i = 0; i < c.mask.size(); ++i) c.mask.data()[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    c.hid = c.hid.cwiseProduct(c.mask);
  }
  c.ah = sparse_dense(a_hat, c.hid);
  Matrix out = c.ah * p.w2;
  out.rowwise() += p.b2.row(0);
  return out;
}

// Parameter gradients of a loss whose logit gradient is `d_logits`; A_hat must be symmetric.
inline std::vector<Matrix> gcn_backward(const GCNParams& p, const RowSparse& a_hat, const GCNCache& c,
                                        const Matrix& d_logits) {
  std::vector<Matrix> g(4);
  g[2] = c.ah.transpose() * d_logits;
  g[3] = d_logits.colwise().sum();
  Matrix d_hid = sparse_dense(a_hat, d_logits * p.w2.transpose());
  if (c.mask.size() > 0) d_hid = d_hid.cwiseProduct(c.mask);
  const Matrix d_pre = d_hid.cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
  g[0] = c.ax.transpose() * d_pre;
  g[1] = d_pre.colwise().sum();
  return g;
}

// Masked cross-entropy of the GCN plus (wd/2)||params||^2, with gradients.
inline double gcn_loss_and_grad(const GCNParams& p, const RowSparse& a_hat, const Matrix& x,
                                std::span<const Index> labels, std::span<const std::uint8_t> mask, double weight_decay,
                                std::vector<Matrix>& grads, bool train_mode = false, Rng* rng = nullptr,
                                const Matrix* ax = nullptr) {
  GCNCache cache;
  const Matrix prob = softmax_predict(gcn_forward(p, a_hat, x, train_mode, rng, &cache, ax));
  double loss = cross_entropy(prob, labels, mask);
  grads = gcn_backward(p, a_hat, cache, cross_entropy_grad(prob, labels, mask));
  if (weight_decay != 0.0) {
    const auto ps = p.parameters();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      loss += 0.5 * weight_decay * ps[k]->squaredNorm();
      grads[k] += weight_decay * *ps[k];
    }
  }
  return loss;
}

enum class ModelSelection { Final, BestValidation };

struct EvalConfig {
  Index hidden = 256;
  double dropout = 0.5;
  double learning_rate = 0.01;
  double weight_decay = 1e-5;
  Index epochs = 600;
  Index num_seeds = 1;
  ModelSelection selection = ModelSelection::Final;
  OptimizerKind optimizer = OptimizerKind::Adam;

  void validate() const {
    require(hidden > 0 && epochs >= 0 && num_seeds >= 1, "eval: hidden, epochs and seed count must be positive");
    require(dropout >= 0.0 && dropout < 1.0, "eval: dropout must lie in [0, 1)");
  }
};

struct GCNTrainResult {
  GCNParams params;
  std::vector<double> loss_trace;
};

// Evaluation view of the original graph: renormalized adjacency and raw attributes.
struct EvalGraph {
  RowSparse a_hat;
  Matrix x;
  Matrix ax;  // a_hat * x, cached
  const Dataset* data = nullptr;

  static EvalGraph of(const Dataset& d) {
    EvalGraph g;
    g.a_hat = renormalize(d.graph);
    g.x = d.features;
    g.ax = sparse_dense(g.a_hat, g.x);
    g.data = &d;
    return g;
  }
};

inline double evaluate_accuracy(const GCNParams& p, const EvalGraph& g, Split split = Split::Test) {
  const Matrix logits = gcn_forward(p, g.a_hat, g.x, false, nullptr, nullptr, &g.ax);
  return accuracy(logits, g.data->labels, g.data->mask(split));
}

namespace detail {

inline GCNTrainResult train_gcn(const RowSparse& a_hat, const Matrix& x, std::span<const Index> labels,
                                std::span<const std::uint8_t> mask, Index num_classes, const EvalConfig& cfg,
                                std::uint64_t seed, const EvalGraph* validation) {
  cfg.validate();
  Rng rng(seed);
  GCNTrainResult out;
  out.params = init_gcn(x.cols(), cfg.hidden, num_classes, cfg.dropout, rng);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
  const Matrix ax = sparse_dense(a_hat, x);
  const bool track = cfg.selection == ModelSelection::BestValidation && validation != nullptr;
  GCNParams best = out.params;
  double best_acc = -1.0;
  std::vector<Matrix> grads;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss = gcn_loss_and_grad(out.params, a_hat, x, labels, mask, 0.0, grads, true, &rng, &ax);
    if (!std::isfinite(loss)) throw DivergedError("train_eval_gcn: diverged", epoch);
    out.loss_trace.push_back(loss);
    auto ps = out.params.parameters();
    opt.step(ps, grads);
    if (track) {
      const double acc = evaluate_accuracy(out.params, *validation, Split::Val);
      if (acc > best_acc) {
        best_acc = acc;
        best = out.params;
      }
    }
  }
  if (track && best_acc >= 0.0) out.params = std::move(best);
  return out;
}

}  // namespace detail

// Full-batch training on (renormalized A', X', Y'). Best-validation selection
// needs `validation` (the original graph); otherwise the final epoch is kept.
inline GCNTrainResult train_eval_gcn(const CondensedGraph& g, const EvalConfig& cfg, std::uint64_t seed,
                                     const EvalGraph* validation = nullptr) {
  g.validate();
  const RowSparse a_hat = renormalize(g.a_prime);
  const auto all = full_mask(g.num_nodes());
  return detail::train_gcn(a_hat, g.x_prime, g.y_prime, all, g.num_classes, cfg, seed, validation);
}

// Reference run: the same evaluator trained on the original graph's training split.
inline GCNTrainResult train_full_gcn(const EvalGraph& g, const EvalConfig& cfg, std::uint64_t seed) {
  return detail::train_gcn(g.a_hat, g.x, g.data->labels, g.data->mask(Split::Train), g.data->num_classes, cfg, seed,
                           &g);
}

struct EvalReport {
  std::vector<double> accuracies;  // one per seed
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double fid_value = 0.0;
  double runtime_seconds = 0.0;

  void finalize() {
    require(!accuracies.empty(), "EvalReport: no accuracies");
    mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
    double var = 0.0;
    for (double a : accuracies) var += (a - mean) * (a - mean);
    std = std::sqrt(var / static_cast<double>(accuracies.size()));
  }
};

// Test accuracy of `params` on the original graph.
inline double evaluate_on_original(const GCNParams& params, const EvalGraph& g) {
  return evaluate_accuracy(params, g, Split::Test);
}

// ---- coreset baselines ----

// Per-class budgets proportional to class sizes among `candidates`, at least one
// per nonempty class; leftovers go to the largest classes.
inline std::vector<Index> class_quotas(std::span<const Index> class_sizes, Index n) {
  const Index K = static_cast<Index>(class_sizes.size());
  const Index total = std::accumulate(class_sizes.begin(), class_sizes.end(), Index{0});
  Index nonempty = 0;
  for (Index s : class_sizes) nonempty += s > 0 ? 1 : 0;
  if (n < nonempty) throw Error("coreset: budget " + std::to_string(n) + " is below the class count " + std::to_string(nonempty));
  if (n > total) throw Error("coreset: budget " + std::to_string(n) + " exceeds candidate count " + std::to_string(total));
  std::vector<Index> quota(static_cast<std::size_t>(K), 0);
  std::vector<Index> by_size(static_cast<std::size_t>(K));
  std::iota(by_size.begin(), by_size.end(), Index{0});
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](Index a, Index b) { return class_sizes[static_cast<std::size_t>(a)] > class_sizes[static_cast<std::size_t>(b)]; });
  Index used = 0;
  for (Index c = 0; c < K; ++c) {
    const Index s = class_sizes[static_cast<std::size_t>(c)];
    if (s == 0) continue;
    quota[static_cast<std::size_t>(c)] = std::max<Index>(1, (n * s) / total);
    used += quota[static_cast<std::size_t>(c)];
  }
  // Raising small classes to one may overshoot; take back from the largest.
  while (used > n) {
    for (Index c : by_size) {
      auto& q = quota[static_cast<std::size_t>(c)];
      if (used > n && q > 1) {
        --q;
        --used;
      }
    }
  }
  while (used < n) {
    for (Index c : by_size) {
      auto& q = quota[static_cast<std::size_t>(c)];
      if (used < n && q < class_sizes[static_cast<std::size_t>(c)]) {
        ++q;
        ++used;
      }
    }
  }
  return quota;
}

enum class CoresetMethod { Random, KCenter, Herding };

inline const char* coreset_name(CoresetMethod m) {
  switch (m) {
    case CoresetMethod::Random: return "random";
    case CoresetMethod::KCenter: return "kcenter";
    default: return "herding";
  }
}

namespace detail {

inline std::vector<Index> kcenter_pick(const Matrix& z, const std::vector<Index>& pool, Index k) {
  RowVector mean = RowVector::Zero(z.cols());
  for (Index i : pool) mean += z.row(i);
  mean /= static_cast<double>(pool.size());
  std::vector<double> dist(pool.size());
  for (std::size_t a = 0; a < pool.size(); ++a) dist[a] = (z.row(pool[a]) - mean).squaredNorm();
  std::vector<Index> picked;
  std::vector<char> taken(pool.size(), 0);
  for (Index step = 0; step < k; ++step) {
    std::size_t best = pool.size();
    for (std::size_t a = 0; a < pool.size(); ++a)
      if (!taken[a] && (best == pool.size() || dist[a] > dist[best])) best = a;
    taken[best] = 1;
    picked.push_back(pool[best]);
    for (std::size_t a = 0; a < pool.size(); ++a) {
      const double d = (z.row(pool[a]) - z.row(pool[best])).squaredNorm();
      dist[a] = step == 0 ? d : std::min(dist[a], d);
    }
  }
  return picked;
}

inline std::vector<Index> herding_pick(const Matrix& z, const std::vector<Index>& pool, Index k) {
  RowVector mean = RowVector::Zero(z.cols());
  for (Index i : pool) mean += z.row(i);
  mean /= static_cast<double>(pool.size());
  RowVector running = RowVector::Zero(z.cols());
  std::vector<char> taken(pool.size(), 0);
  std::vector<Index> picked;
  for (Index step = 1; step <= k; ++step) {
    std::size_t best = pool.size();
    double best_d = 0.0;
    for (std::size_t a = 0; a < pool.size(); ++a) {
      if (taken[a]) continue;
      const double d = (mean - (running + z.row(pool[a])) / static_cast<double>(step)).squaredNorm();
      if (best == pool.size() || d < best_d) {
        best = a;
        best_d = d;
      }
    }
    taken[best] = 1;
    running += z.row(pool[best]);
    picked.push_back(pool[best]);
  }
  return picked;
}

}  // namespace detail

// Selected training-node ids (sorted) for a coreset of size n.
inline std::vector<Index> coreset_select(const Dataset& data, const Matrix& z, Index n, std::uint64_t seed,
                                         CoresetMethod method) {
  std::vector<std::vector<Index>> pools(static_cast<std::size_t>(data.num_classes));
  for (Index i : data.nodes_in(Split::Train)) pools[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
  std::vector<Index> sizes;
  for (const auto& p : pools) sizes.push_back(static_cast<Index>(p.size()));
  const auto quota = class_quotas(sizes, n);
  Rng rng(seed);
  std::vector<Index> picked;
  for (std::size_t c = 0; c < pools.size(); ++c) {
    auto pool = pools[c];
    const Index k = quota[c];
    if (k == 0) continue;
    std::vector<Index> got;
    switch (method) {
      case CoresetMethod::Random:
        std::shuffle(pool.begin(), pool.end(), rng.engine());
        got.assign(pool.begin(), pool.begin() + k);
        break;
      case CoresetMethod::KCenter: got = detail::kcenter_pick(z, pool, k); break;
      case CoresetMethod::Herding: got = detail::herding_pick(z, pool, k); break;
    }
    picked.insert(picked.end(), got.begin(), got.end());
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

// X' = selected rows of Z, A' = the induced block of `a_norm`, Y' = true labels.
inline CondensedGraph coreset_condensed(const Dataset& data, const SparseGraph& a_norm, const Matrix& z,
                                        const std::vector<Index>& picked, const std::string& source) {
  CondensedGraph g;
  const Index n = static_cast<Index>(picked.size());
  g.x_prime.resize(n, z.cols());
  g.a_prime = Matrix::Zero(n, n);
  for (Index a = 0; a < n; ++a) {
    g.x_prime.row(a) = z.row(picked[static_cast<std::size_t>(a)]);
    g.y_prime.push_back(data.labels[static_cast<std::size_t>(picked[static_cast<std::size_t>(a)])]);
    for (Index b = 0; b < n; ++b)
      g.a_prime(a, b) = a_norm.weight(picked[static_cast<std::size_t>(a)], picked[static_cast<std::size_t>(b)]);
  }
  g.num_classes = data.num_classes;
  g.meta.source = source;
  g.meta.ratio = static_cast<double>(n) / static_cast<double>(data.num_nodes());
  return g;
}

inline CondensedGraph coreset(const Dataset& data, const SparseGraph& a_norm, const Matrix& z, Index n,
                              std::uint64_t seed, CoresetMethod method) {
  CondensedGraph g = coreset_condensed(data, a_norm, z, coreset_select(data, z, n, seed, method), data.name);
  g.meta.seed = seed;
  g.meta.metrics["method"] = coreset_name(method);
  return g;
}

inline CondensedGraph coreset_random(const Dataset& d, const SparseGraph& a_norm, const Matrix& z, Index n,
                                     std::uint64_t seed) {
  return coreset(d, a_norm, z, n, seed, CoresetMethod::Random);
}
inline CondensedGraph coreset_kcenter(const Dataset& d, const SparseGraph& a_norm, const Matrix& z, Index n,
                                      std::uint64_t seed) {
  return coreset(d, a_norm, z, n, seed, CoresetMethod::KCenter);
}
inline CondensedGraph coreset_herding(const Dataset& d, const SparseGraph& a_norm, const Matrix& z, Index n,
                                      std::uint64_t seed) {
  return coreset(d, a_norm, z, n, seed, CoresetMethod::Herding);
}

}  // namespace gdist
