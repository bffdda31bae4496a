#pragma once

// Class-aware attribute refinement: per-class sampled graphs weighted by
// prediction agreement and approximate effective resistance, their condensed
// counterparts, and joint training of the attribute augmentation and head.

#include <algorithm>
#include <numeric>
#include <optional>

#include "gdist/condense.hpp"
#include "gdist/model.hpp"
#include "gdist/propagate.hpp"

namespace gdist {

inline constexpr double kCosineFloor = 1e-6;

// Per-node sum of neighbor cosine similarities, each clamped to [1e-6, 1].
inline Vector cosine_degrees(const SparseGraph& graph, const Matrix& h) {
  require(h.rows() == graph.num_nodes(), "cosine_degrees: representation rows must equal node count");
  Vector norms(h.rows());
  for (Index i = 0; i < h.rows(); ++i) norms(i) = h.row(i).norm();
  Vector out = Vector::Zero(graph.num_nodes());
  for (Index i = 0; i < graph.num_nodes(); ++i) {
    for (Index l : graph.neighbors(i)) {
      if (l == i) continue;
      double c = kCosineFloor;
      if (norms(i) > 0.0 && norms(l) > 0.0) c = h.row(i).dot(h.row(l)) / (norms(i) * norms(l));
      out(i) += std::clamp(c, kCosineFloor, 1.0);
    }
  }
  return out;
}

// r(u, v) ~ (1/2)(1/d~(u) + 1/d~(v)) per undirected edge, in edge-id order.
inline Vector effective_resistance_approx(const SparseGraph& graph, const Vector& d_tilde) {
  require(d_tilde.size() == graph.num_nodes(), "effective_resistance_approx: degree vector length mismatch");
  const auto edges = graph.edge_list();
  Vector r(static_cast<Index>(edges.size()));
  for (std::size_t k = 0; k < edges.size(); ++k)
    r(static_cast<Index>(k)) = 0.5 * (1.0 / d_tilde(edges[k].u) + 1.0 / d_tilde(edges[k].v));
  return r;
}

// w(u, v) = P[u, y] * P[v, y] * r(u, v) per undirected edge.
inline Vector class_edge_weights(const SparseGraph& graph, const Matrix& p, const Vector& r, Index y) {
  require(p.rows() == graph.num_nodes() && y >= 0 && y < p.cols(), "class_edge_weights: bad prediction matrix or class");
  const auto edges = graph.edge_list();
  require(r.size() == static_cast<Index>(edges.size()), "class_edge_weights: resistance vector length mismatch");
  Vector w(r.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto ki = static_cast<Index>(k);
    w(ki) = p(edges[k].u, y) * p(edges[k].v, y) * r(ki);
  }
  return w;
}

// Values carried by the retained edges of a sampled class graph.
enum class ClassGraphWeighting { Adjacency, EdgeWeight };

struct ClassGraphSet {
  std::vector<SparseGraph> sampled;  // A°(y), N x N
  std::vector<Matrix> condensed;     // A'(y), n x n
};

inline Index sample_budget(Index num_edges, double rho) {
  return std::min<Index>(num_edges, static_cast<Index>(std::ceil(rho * static_cast<double>(num_edges) - 1e-9)));
}

// Keeps, for every class, the ceil(rho M) undirected edges with the largest
// weight (ties by edge id).
inline std::vector<SparseGraph> sample_class_graphs(const SparseGraph& graph, const Matrix& p, const Vector& r,
                                                    double rho,
                                                    ClassGraphWeighting weighting = ClassGraphWeighting::Adjacency) {
  require(rho > 0.0 && rho <= 1.0, "sample_class_graphs: rho must lie in (0, 1]");
  const auto edges = graph.edge_list();
  const Index budget = sample_budget(graph.num_edges(), rho);
  std::vector<SparseGraph> out;
  std::vector<Index> order(edges.size());
  for (Index y = 0; y < p.cols(); ++y) {
    const Vector w = class_edge_weights(graph, p, r, y);
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + budget, order.end(), [&](Index a, Index b) {
      if (w(a) != w(b)) return w(a) > w(b);
      return a < b;
    });
    std::vector<Edge> kept;
    kept.reserve(static_cast<std::size_t>(budget));
    for (Index k = 0; k < budget; ++k) {
      const Edge& e = edges[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      const double value = weighting == ClassGraphWeighting::Adjacency ? e.weight : w(order[static_cast<std::size_t>(k)]);
      kept.push_back({e.u, e.v, value});
    }
    out.push_back(SparseGraph::from_edges(graph.num_nodes(), kept, true));
  }
  return out;
}

// A'(y) = C~^T A°(y) C~ for every class.
inline std::vector<Matrix> condense_class_graphs(const SparseMatrix& sketch, const std::vector<SparseGraph>& sampled) {
  std::vector<Matrix> out;
  out.reserve(sampled.size());
  for (const auto& g : sampled) out.push_back(condense_adjacency(sketch, g));
  return out;
}

// Full class-graph construction: cosine degrees on H, approximate resistances,
// per-class top-rho sampling on A~, and condensation.
inline ClassGraphSet build_class_graphs(const SparseGraph& a_norm, const Matrix& h, const Matrix& p,
                                        const SparseMatrix& sketch, double rho,
                                        ClassGraphWeighting weighting = ClassGraphWeighting::Adjacency) {
  ClassGraphSet set;
  const Vector r = effective_resistance_approx(a_norm, cosine_degrees(a_norm, h));
  set.sampled = sample_class_graphs(a_norm, p, r, rho, weighting);
  set.condensed = condense_class_graphs(sketch, set.sampled);
  return set;
}

// H'(y) = head( sum_t (1-alpha) alpha^t A'(y)^t (X' + beta Delta) ), head in eval mode.
inline std::vector<Matrix> class_representations(const std::vector<Matrix>& condensed_graphs, const Matrix& x_prime,
                                                 const Matrix& delta, double beta, const ClassifierParams& head,
                                                 double alpha, Index t_prime) {
  require(delta.rows() == x_prime.rows() && delta.cols() == x_prime.cols(), "class_representations: Delta shape mismatch");
  const Matrix x_aug = x_prime + beta * delta;
  const PropagationConfig cfg{alpha, t_prime};
  std::vector<Matrix> out;
  for (const auto& a : condensed_graphs) out.push_back(forward(head, gls_propagate_dense(a, x_aug, cfg)));
  return out;
}

// -(1/n) sum_i sum_y log P'(y)[i, y'_i], summed over views, averaged over nodes.
inline double syn_loss(const std::vector<Matrix>& predictions, std::span<const Index> y_prime) {
  require(!predictions.empty(), "syn_loss: no views");
  const Index n = predictions.front().rows();
  require(n > 0 && static_cast<Index>(y_prime.size()) == n, "syn_loss: label count must equal row count");
  double loss = 0.0;
  for (const auto& p : predictions)
    for (Index i = 0; i < n; ++i) loss -= std::log(std::max(p(i, y_prime[static_cast<std::size_t>(i)]), kLogClamp));
  return loss / static_cast<double>(n);
}

// (1/(n K)) sum_i sum_y ||P(y)_i - mean_y P(y)_i||^2 over K views.
inline double consistency_loss(const std::vector<Matrix>& predictions) {
  require(!predictions.empty(), "consistency_loss: no views");
  const double k = static_cast<double>(predictions.size());
  Matrix mean = Matrix::Zero(predictions.front().rows(), predictions.front().cols());
  for (const auto& p : predictions) mean += p;
  mean /= k;
  double loss = 0.0;
  for (const auto& p : predictions) loss += (p - mean).squaredNorm();
  return loss / (static_cast<double>(mean.rows()) * k);
}

struct RefineConfig {
  double beta = 0.01;
  double rho = 0.4;
  Index t_prime = 2;
  std::optional<double> alpha_prime;  // unset: reuse the pretraining alpha
  double gamma = 7.0;
  double lambda = 0.1;
  Index epochs = 2000;  // E3
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  ClassGraphWeighting weighting = ClassGraphWeighting::Adjacency;

  void validate() const {
    require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
    require(gamma >= 0.0 && lambda >= 0.0, "gamma and lambda must be nonnegative");
    require(t_prime >= 0 && epochs >= 0, "T' and E3 must be nonnegative");
    require(!alpha_prime || (*alpha_prime >= 0.0 && *alpha_prime < 1.0), "alpha' must lie in [0, 1)");
  }
};

// Everything refinement reads but never updates.
struct RefineProblem {
  Matrix z_train;                    // full-graph representations of supervised nodes
  std::vector<Index> labels_train;   // their labels
  Matrix x_prime;                    // n x d
  std::vector<Index> y_prime;        // n synthetic labels
  std::vector<Matrix> view_operators;  // per class: sum_t (1-a) a^t A'(y)^t, n x n

  static RefineProblem make(const Matrix& z, std::span<const Index> labels, std::span<const std::uint8_t> train_mask,
                            const Matrix& x_prime, std::vector<Index> y_prime,
                            const std::vector<Matrix>& condensed_graphs, double alpha, Index t_prime) {
    RefineProblem prob;
    std::vector<Index> rows;
    for (std::size_t i = 0; i < train_mask.size(); ++i)
      if (train_mask[i]) rows.push_back(static_cast<Index>(i));
    if (rows.empty()) throw Error("refine: empty training mask");
    prob.z_train.resize(static_cast<Index>(rows.size()), z.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      prob.z_train.row(static_cast<Index>(k)) = z.row(rows[k]);
      prob.labels_train.push_back(labels[static_cast<std::size_t>(rows[k])]);
    }
    prob.x_prime = x_prime;
    prob.y_prime = std::move(y_prime);
    const PropagationConfig cfg{alpha, t_prime};
    for (const auto& a : condensed_graphs) prob.view_operators.push_back(propagation_operator(a, cfg));
    return prob;
  }
};

struct RefineLoss {
  double total = 0.0;
  double org = 0.0;
  double syn = 0.0;
  double cst = 0.0;
};

// Objective L_org + gamma L_syn + lambda L_cst + (wd/2)||head||^2 and its
// gradients with respect to the head parameters and Delta. Views are
// accumulated in class order.
inline RefineLoss refine_loss_and_grad(const RefineProblem& prob, const ClassifierParams& head, const Matrix& delta,
                                       const RefineConfig& cfg, Gradients& head_grads, Matrix& delta_grad,
                                       bool train_mode = false, Rng* rng = nullptr) {
  RefineLoss loss;
  head_grads = zero_gradients(head);
  delta_grad = Matrix::Zero(delta.rows(), delta.cols());

  {
    ForwardCache cache;
    const Matrix p = softmax_predict(forward(head, prob.z_train, train_mode, rng, &cache));
    const auto all = full_mask(p.rows());
    loss.org = cross_entropy(p, prob.labels_train, all);
    backward(head, cache, cross_entropy_grad(p, prob.labels_train, all), head_grads);
  }

  const Index views = static_cast<Index>(prob.view_operators.size());
  if (views > 0 && (cfg.gamma != 0.0 || cfg.lambda != 0.0)) {
    const Index n = prob.x_prime.rows();
    const Matrix x_aug = prob.x_prime + cfg.beta * delta;
    std::vector<ForwardCache> caches(static_cast<std::size_t>(views));
    std::vector<Matrix> preds;
    for (Index y = 0; y < views; ++y) {
      const Matrix u = prob.view_operators[static_cast<std::size_t>(y)] * x_aug;
      preds.push_back(softmax_predict(forward(head, u, train_mode, rng, &caches[static_cast<std::size_t>(y)])));
    }
    loss.syn = syn_loss(preds, prob.y_prime);
    loss.cst = consistency_loss(preds);

    Matrix mean = Matrix::Zero(n, preds.front().cols());
    for (const auto& p : preds) mean += p;
    mean /= static_cast<double>(views);
    const double cst_scale = 2.0 / (static_cast<double>(n) * static_cast<double>(views));

    Matrix d_xaug = Matrix::Zero(n, prob.x_prime.cols());
    for (Index y = 0; y < views; ++y) {
      const Matrix& p = preds[static_cast<std::size_t>(y)];
      Matrix d_logits = Matrix::Zero(n, p.cols());
      if (cfg.gamma != 0.0) {
        Matrix g = p;
        for (Index i = 0; i < n; ++i) g(i, prob.y_prime[static_cast<std::size_t>(i)]) -= 1.0;
        d_logits += (cfg.gamma / static_cast<double>(n)) * g;
      }
      if (cfg.lambda != 0.0) {
        const Matrix d_p = (cfg.lambda * cst_scale) * (p - mean);
        const Vector inner = d_p.cwiseProduct(p).rowwise().sum();
        d_logits += p.cwiseProduct(d_p - inner.replicate(1, p.cols()));
      }
      const Matrix d_u = backward(head, caches[static_cast<std::size_t>(y)], d_logits, head_grads);
      d_xaug.noalias() += prob.view_operators[static_cast<std::size_t>(y)].transpose() * d_u;
    }
    delta_grad = cfg.beta * d_xaug;
  }

  loss.total = loss.org + cfg.gamma * loss.syn + cfg.lambda * loss.cst;
  if (cfg.weight_decay != 0.0) {
    const auto ps = head.parameters();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      loss.total += 0.5 * cfg.weight_decay * ps[k]->squaredNorm();
      head_grads[k] += cfg.weight_decay * *ps[k];
    }
  }
  return loss;
}

struct RefineResult {
  Matrix x_refined;  // X' + beta Delta
  Matrix delta;
  ClassifierParams head;
  std::vector<RefineLoss> loss_trace;
};

// Joint training of Delta (zero-initialized) and the head for cfg.epochs steps.
inline RefineResult refine(const RefineProblem& prob, ClassifierParams head, const RefineConfig& cfg) {
  cfg.validate();
  head.validate();
  Rng rng(cfg.seed);
  RefineResult out;
  out.delta = Matrix::Zero(prob.x_prime.rows(), prob.x_prime.cols());
  // Weight decay is folded into the head gradient by refine_loss_and_grad.
  Optimizer head_opt(cfg.optimizer, cfg.learning_rate, 0.0);
  Optimizer delta_opt(cfg.optimizer, cfg.learning_rate, 0.0);
  Gradients head_grads;
  Matrix delta_grad;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const RefineLoss loss = refine_loss_and_grad(prob, head, out.delta, cfg, head_grads, delta_grad, true, &rng);
    if (!std::isfinite(loss.total)) throw DivergedError("refine: diverged", epoch);
    out.loss_trace.push_back(loss);
    auto ps = head.parameters();
    head_opt.step(ps, head_grads);
    Matrix* dp[] = {&out.delta};
    delta_opt.step(dp, std::span<const Matrix>(&delta_grad, 1));
  }
  out.x_refined = prob.x_prime + cfg.beta * out.delta;
  out.head = std::move(head);
  return out;
}

}  // namespace gdist
