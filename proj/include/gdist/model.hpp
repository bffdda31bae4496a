#pragma once

// Multilayer perceptron head with hand-derived gradients and its training loop.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gdist/core.hpp"

namespace gdist {

struct Layer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

// Layers chain input -> hidden ... -> K. Depth 1 is the plain linear map Z W + b.
struct ClassifierParams {
  std::vector<Layer> layers;
  double dropout = 0.0;

  Index depth() const { return static_cast<Index>(layers.size()); }
  Index input_dim() const { return layers.front().weight.rows(); }
  Index output_dim() const { return layers.back().weight.cols(); }

  void validate() const {
    require(!layers.empty(), "classifier needs at least one layer");
    require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      require(layers[l].bias.rows() == 1 && layers[l].bias.cols() == layers[l].weight.cols(), "bias shape mismatch");
      if (l > 0) require(layers[l - 1].weight.cols() == layers[l].weight.rows(), "layer dimensions do not chain");
    }
  }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (auto& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> out;
    for (const auto& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
};

// Same shapes as ClassifierParams::parameters().
using Gradients = std::vector<Matrix>;

inline Gradients zero_gradients(const ClassifierParams& p) {
  Gradients g;
  for (const Matrix* m : p.parameters()) g.push_back(Matrix::Zero(m->rows(), m->cols()));
  return g;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline ClassifierParams init_classifier(Index input_dim, Index hidden_dim, Index output_dim, Index depth,
                                        double dropout, Rng& rng) {
  require(depth >= 1, "classifier depth must be at least 1");
  require(input_dim > 0 && output_dim > 0 && (depth == 1 || hidden_dim > 0), "classifier dims must be positive");
  ClassifierParams p;
  p.dropout = dropout;
  for (Index l = 0; l < depth; ++l) {
    const Index in = l == 0 ? input_dim : hidden_dim;
    const Index out = l == depth - 1 ? output_dim : hidden_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer{Matrix(in, out), Matrix(1, out)};
    for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

// Intermediate values kept by a forward pass for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each layer (after activation and dropout)
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
  std::vector<Matrix> masks;   // scaled dropout masks, empty when inactive
};

// Logits of the MLP. In train mode dropout (inverted scaling) is applied to
// hidden activations only, using `rng`; eval mode is deterministic.
inline Matrix forward(const ClassifierParams& params, const Matrix& z, bool train_mode = false, Rng* rng = nullptr,
                      ForwardCache* cache = nullptr) {
  require(z.cols() == params.input_dim(), "forward: input has " + std::to_string(z.cols()) +
                                              " columns, classifier expects " + std::to_string(params.input_dim()));
  const bool use_dropout = train_mode && params.dropout > 0.0;
  require(!use_dropout || rng != nullptr, "forward: train-mode dropout needs a random source");
  if (cache) *cache = ForwardCache{};
  Matrix act = z;
  for (Index l = 0; l < params.depth(); ++l) {
    const Layer& layer = params.layers[static_cast<std::size_t>(l)];
    Matrix pre = act * layer.weight;
    pre.rowwise() += layer.bias.row(0);
    if (cache) cache->inputs.push_back(act);
    if (l == params.depth() - 1) return pre;
    act = pre.cwiseMax(0.0);
    Matrix mask;
    if (use_dropout) {
      const double keep = 1.0 - params.dropout;
      mask.resize(act.rows(), act.cols());
      for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      act = act.cwiseProduct(mask);
    }
    if (cache) {
      cache->pre.push_back(std::move(pre));
      cache->masks.push_back(std::move(mask));
    }
  }
  return act;  // unreachable: depth >= 1
}

// Backpropagates d(loss)/d(logits) through the cached forward pass. Parameter
// gradients are added into `grads`; returns d(loss)/d(input).
inline Matrix backward(const ClassifierParams& params, const ForwardCache& cache, const Matrix& d_logits,
                       Gradients& grads) {
  require(static_cast<Index>(cache.inputs.size()) == params.depth(), "backward: cache does not match params");
  Matrix delta = d_logits;
  for (Index l = params.depth() - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    grads[2 * li].noalias() += cache.inputs[li].transpose() * delta;
    grads[2 * li + 1] += delta.colwise().sum();
    Matrix d_input = delta * params.layers[li].weight.transpose();
    if (l == 0) return d_input;
    const Matrix& mask = cache.masks[li - 1];
    if (mask.size() > 0) d_input = d_input.cwiseProduct(mask);
    const Matrix& pre = cache.pre[li - 1];
    delta = d_input.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  }
  return {};
}

// Row-wise softmax with max subtraction.
inline Matrix softmax_predict(const Matrix& h) {
  Matrix p(h.rows(), h.cols());
  for (Index i = 0; i < h.rows(); ++i) {
    const double mx = h.row(i).maxCoeff();
    p.row(i) = (h.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline constexpr double kLogClamp = 1e-12;

inline Index mask_count(std::span<const std::uint8_t> mask) {
  return static_cast<Index>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

inline std::vector<std::uint8_t> full_mask(Index n) { return std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1); }

// -(1/|mask|) sum_{i in mask} log P[i, y_i], log clamped at 1e-12.
inline double cross_entropy(const Matrix& p, std::span<const Index> labels, std::span<const std::uint8_t> mask) {
  require(static_cast<Index>(labels.size()) == p.rows() && static_cast<Index>(mask.size()) == p.rows(),
          "cross_entropy: labels and mask must cover all rows");
  const Index count = mask_count(mask);
  if (count == 0) throw Error("cross_entropy: empty mask");
  double loss = 0.0;
  for (Index i = 0; i < p.rows(); ++i)
    if (mask[static_cast<std::size_t>(i)]) loss -= std::log(std::max(p(i, labels[static_cast<std::size_t>(i)]), kLogClamp));
  return loss / static_cast<double>(count);
}

// Gradient of cross_entropy(softmax(H)) with respect to H: (P - Y)/|mask| on masked rows.
inline Matrix cross_entropy_grad(const Matrix& p, std::span<const Index> labels, std::span<const std::uint8_t> mask) {
  const Index count = mask_count(mask);
  if (count == 0) throw Error("cross_entropy: empty mask");
  Matrix g = Matrix::Zero(p.rows(), p.cols());
  for (Index i = 0; i < p.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    g.row(i) = p.row(i);
    g(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  return g / static_cast<double>(count);
}

enum class OptimizerKind { GradientDescent, Adam };

// Gradient descent or Adam with coupled L2 weight decay (decay added to the
// gradient before the update).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double weight_decay)
      : kind_(kind), lr_(learning_rate), wd_(weight_decay) {}

  void step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
    require(params.size() == grads.size(), "optimizer: parameter/gradient count mismatch");
    if (first_.empty()) {
      for (Matrix* p : params) {
        first_.push_back(Matrix::Zero(p->rows(), p->cols()));
        second_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix g = grads[k];
      if (wd_ != 0.0) g += wd_ * *params[k];
      if (kind_ == OptimizerKind::GradientDescent) {
        *params[k] -= lr_ * g;
        continue;
      }
      first_[k] = kBeta1 * first_[k] + (1.0 - kBeta1) * g;
      second_[k] = kBeta2 * second_[k] + (1.0 - kBeta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
      *params[k] -= (lr_ / c1) * (first_[k].array() / ((second_[k].array() / c2).sqrt() + kEps)).matrix();
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  OptimizerKind kind_;
  double lr_, wd_;
  Index t_ = 0;
  std::vector<Matrix> first_, second_;
};

struct TrainConfig {
  Index epochs = 80;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  Index batch_size = 0;  // 0 = full batch
  OptimizerKind optimizer = OptimizerKind::GradientDescent;

  void validate() const {
    require(epochs >= 0, "epochs must be nonnegative");
    require(learning_rate >= 0.0, "learning rate must be nonnegative");
    require(weight_decay >= 0.0, "weight decay must be nonnegative");
    require(batch_size >= 0, "batch size must be nonnegative");
  }
};

// Masked cross-entropy plus (weight_decay / 2) * ||params||^2 and its gradient.
inline double classifier_loss_and_grad(const ClassifierParams& params, const Matrix& z, std::span<const Index> labels,
                                       std::span<const std::uint8_t> mask, double weight_decay, Gradients& grads,
                                       bool train_mode = false, Rng* rng = nullptr) {
  ForwardCache cache;
  const Matrix p = softmax_predict(forward(params, z, train_mode, rng, &cache));
  double loss = cross_entropy(p, labels, mask);
  grads = zero_gradients(params);
  backward(params, cache, cross_entropy_grad(p, labels, mask), grads);
  if (weight_decay != 0.0) {
    const auto ps = params.parameters();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      loss += 0.5 * weight_decay * ps[k]->squaredNorm();
      grads[k] += weight_decay * *ps[k];
    }
  }
  return loss;
}

struct TrainResult {
  ClassifierParams params;
  std::vector<double> loss_trace;  // masked cross-entropy before each update
};

// Trains on precomputed representations Z; touches no graph structure.
inline TrainResult train_classifier(const Matrix& z, std::span<const Index> labels,
                                    std::span<const std::uint8_t> mask, ClassifierParams params,
                                    const TrainConfig& cfg) {
  cfg.validate();
  params.validate();
  require(z.rows() == static_cast<Index>(labels.size()) && z.rows() == static_cast<Index>(mask.size()),
          "train_classifier: labels and mask must cover all rows");
  if (mask_count(mask) == 0) throw Error("train_classifier: empty training mask");

  Rng rng(cfg.seed);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
  std::vector<Index> supervised;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) supervised.push_back(static_cast<Index>(i));

  TrainResult result;
  std::vector<std::uint8_t> batch_mask;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::span<const std::uint8_t> active = mask;
    if (cfg.batch_size > 0 && cfg.batch_size < static_cast<Index>(supervised.size())) {
      batch_mask.assign(mask.size(), 0);
      std::vector<Index> pool = supervised;
      for (Index k = 0; k < cfg.batch_size; ++k) {
        const Index pick = k + rng.index(static_cast<Index>(pool.size()) - k);
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick)]);
        batch_mask[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = 1;
      }
      active = batch_mask;
    }
    ForwardCache cache;
    const Matrix p = softmax_predict(forward(params, z, true, &rng, &cache));
    const double loss = cross_entropy(p, labels, active);
    if (!std::isfinite(loss)) throw DivergedError("train_classifier: diverged", epoch);
    result.loss_trace.push_back(loss);
    Gradients grads = zero_gradients(params);
    backward(params, cache, cross_entropy_grad(p, labels, active), grads);
    auto ps = params.parameters();
    opt.step(ps, grads);
  }
  result.params = std::move(params);
  return result;
}

inline double accuracy(const Matrix& logits, std::span<const Index> labels, std::span<const std::uint8_t> mask) {
  Index correct = 0, total = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    ++total;
    if (row_argmax(logits.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  if (total == 0) throw Error("accuracy: empty mask");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace gdist
