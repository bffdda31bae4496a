#pragma once

// End-to-end distillation: propagate, pretrain the head, cluster its logits,
// build the condensed triple, refine attributes, evaluate.

#include <chrono>
#include <cmath>
#include <utility>

#include "gdist/caar.hpp"
#include "gdist/cluster.hpp"
#include "gdist/condense.hpp"
#include "gdist/config.hpp"
#include "gdist/eval.hpp"
#include "gdist/fid.hpp"
#include "gdist/model.hpp"
#include "gdist/propagate.hpp"

namespace gdist {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct TheoryReport {
  double mean_shift_sq = 0.0;   // ||mu_org - mu_syn||^2 on row-normalized logits
  double theorem1_bound = 0.0;
  double theorem2_lhs = 0.0;    // covariance part of the distance
  double theorem2_rhs = 0.0;
};

struct Distillation {
  CondensedGraph condensed;
  Clustering clustering;
  Matrix z;  // propagated attributes of the graph that was condensed
  TheoryReport theory;
  double icad_before = std::nan("");
  double icad_after = std::nan("");
  double homophily = std::nan("");
  std::vector<StageTiming> timings;
};

struct PipelineResult {
  Distillation distill;
  EvalReport eval;
  std::vector<StageTiming> timings;
  double total_seconds = 0.0;
};

namespace detail {

template <class F>
auto timed_stage(const char* name, std::vector<StageTiming>& timings, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto out = f();
      finish();
      return out;
    }
  } catch (const DivergedError& e) {
    throw DivergedError(std::string(name) + ": " + e.what(), e.step());
  } catch (const std::exception& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) { return Rng(seed).fork(salt).engine()(); }

inline double icad_or_nan(const Matrix& x, std::span<const Index> y, Index k) {
  try {
    return icad(x, y, k);
  } catch (const Error&) {
    return std::nan("");
  }
}

}  // namespace detail

// Number of synthetic nodes for a graph of `num_nodes` nodes with `num_train` supervised ones.
inline Index condensed_size(const PipelineConfig& cfg, Index num_nodes, Index num_train) {
  if (cfg.n > 0) return cfg.n;
  const double base = static_cast<double>(cfg.ratio_base == "train" ? num_train : num_nodes);
  return std::max<Index>(1, static_cast<Index>(std::llround(cfg.ratio * base)));
}

// The graph actually condensed: the whole dataset (transductive) or its
// training-induced subgraph (inductive).
inline Dataset condensation_source(const Dataset& data, const PipelineConfig& cfg) {
  if (!cfg.inductive) return data;
  const auto train = data.nodes_in(Split::Train);
  return induced_subgraph(data, train);
}

inline TheoryReport theory_report(const Matrix& h, const Clustering& clustering, const SparseMatrix& sketch) {
  TheoryReport t;
  const Matrix hn = row_normalized(h);
  const Matrix hp = condensed_representations(sketch, hn);
  const GaussianStats org = gaussian_stats(hn, false);
  t.theorem1_bound = theorem1_bound(clustering);
  if (clustering.n < 2) {
    t.mean_shift_sq = (org.mu - hp.row(0).transpose()).squaredNorm();
    t.theorem2_lhs = t.theorem2_rhs = std::nan("");
    return t;
  }
  const GaussianStats syn = gaussian_stats(hp, false);
  t.mean_shift_sq = (org.mu - syn.mu).squaredNorm();
  t.theorem2_lhs = fid_covariance_term(org, syn);
  t.theorem2_rhs = theorem2_bound(hn, hp, clustering, org, t.mean_shift_sq);
  return t;
}

// Condensation without evaluation; stage timings land in `timings`.
inline Distillation distill(const Dataset& input, const PipelineConfig& cfg) {
  cfg.validate();
  input.validate();
  Distillation out;
  auto& tm = out.timings;
  const Dataset data = condensation_source(input, cfg);
  const auto train_mask = data.mask(Split::Train);
  const Index N = data.num_nodes(), K = data.num_classes;
  const Index n = condensed_size(cfg, N, mask_count(train_mask));
  if (n >= N) throw Error("condensed size " + std::to_string(n) + " must be below node count " + std::to_string(N));
  if (data.graph.num_edges() > 0) out.homophily = homophily_ratio(data.graph, data.labels);

  const SparseGraph a_norm = normalized_adjacency(data.graph);
  out.z = detail::timed_stage("propagate", tm, [&] { return gls_propagate(a_norm, data.features, cfg.propagation()); });

  const ClassifierParams head = detail::timed_stage("pretrain", tm, [&] {
    Rng init_rng(detail::derive_seed(cfg.seed, 1));
    ClassifierParams p = init_classifier(out.z.cols(), cfg.hidden, K, cfg.depth, cfg.dropout, init_rng);
    TrainConfig tc;
    tc.epochs = cfg.E1;
    tc.learning_rate = cfg.learning_rate;
    tc.weight_decay = cfg.weight_decay;
    tc.seed = detail::derive_seed(cfg.seed, 2);
    tc.batch_size = cfg.pretrain_batch;
    tc.optimizer = cfg.optimizer_kind();
    return train_classifier(out.z, data.labels, train_mask, std::move(p), tc).params;
  });
  const Matrix h = forward(head, out.z);
  const Matrix prob = softmax_predict(h);

  out.clustering = detail::timed_stage("cluster", tm, [&] {
    const std::uint64_t s = detail::derive_seed(cfg.seed, 3);
    return N > cfg.minibatch_threshold ? minibatch_kmeans(h, n, s, cfg.kmeans()) : kmeans(h, n, s, cfg.kmeans());
  });
  const SketchingMatrices sk = sketching_matrices(out.clustering);

  CondensedGraph& g = out.condensed;
  detail::timed_stage("condense", tm, [&] {
    g.x_prime = condense_attributes(sk.sketch, out.z);
    g.a_prime = sparsify_condensed(condense_adjacency(sk.sketch, a_norm), cfg.sparsify);
    g.y_prime = condense_labels(sk.sketch, h);
    g.num_classes = K;
  });
  out.icad_before = detail::icad_or_nan(g.x_prime, g.y_prime, K);
  out.theory = theory_report(h, out.clustering, sk.sketch);

  const RefineConfig rc = cfg.refine(detail::derive_seed(cfg.seed, 5));
  const ClassGraphSet classes =
      detail::timed_stage("class_graphs", tm, [&] { return build_class_graphs(a_norm, h, prob, sk.sketch, rc.rho, rc.weighting); });

  detail::timed_stage("refine", tm, [&] {
    Rng init_rng(detail::derive_seed(cfg.seed, 4));
    ClassifierParams w_prime = init_classifier(out.z.cols(), cfg.hidden, K, cfg.depth, cfg.dropout, init_rng);
    const double alpha_v = rc.alpha_prime.value_or(cfg.alpha);
    const RefineProblem prob_r =
        RefineProblem::make(out.z, data.labels, train_mask, g.x_prime, g.y_prime, classes.condensed, alpha_v, rc.t_prime);
    RefineResult r = refine(prob_r, std::move(w_prime), rc);
    g.x_prime = std::move(r.x_refined);
  });
  out.icad_after = detail::icad_or_nan(g.x_prime, g.y_prime, K);

  if (cfg.clustgdd_x) g.a_prime = Matrix::Identity(n, n);

  g.meta.source = input.name;
  g.meta.ratio = static_cast<double>(n) / static_cast<double>(cfg.ratio_base == "train" ? mask_count(train_mask) : N);
  g.meta.seed = cfg.seed;
  g.meta.config_hash = cfg.hash();
  g.validate();
  return out;
}

// Trains the evaluator on `g` once per evaluation seed and tests on the
// original graph. FID compares the first run's logits on the original graph
// with its logits on the condensed graph.
inline EvalReport evaluate_condensed(const CondensedGraph& g, const Dataset& data, const PipelineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const EvalConfig ec = cfg.eval();
  const EvalGraph eg = EvalGraph::of(data);
  EvalReport rep;
  for (Index s = 0; s < ec.num_seeds; ++s) {
    const GCNTrainResult tr = train_eval_gcn(g, ec, detail::derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(s)), &eg);
    rep.accuracies.push_back(evaluate_on_original(tr.params, eg));
    if (s == 0) {
      const Matrix h_org = gcn_forward(tr.params, eg.a_hat, eg.x, false, nullptr, nullptr, &eg.ax);
      const Matrix h_syn = gcn_forward(tr.params, renormalize(g.a_prime), g.x_prime);
      rep.fid_value = g.num_nodes() >= 2
                          ? fid(gaussian_stats(h_org, cfg.fid_normalize), gaussian_stats(h_syn, cfg.fid_normalize))
                          : std::nan("");
    }
  }
  rep.finalize();
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

inline std::string format_metric(double v) { return format_double(v); }

// Deterministic metrics written next to the condensed graph.
inline void attach_metrics(CondensedGraph& g, const Distillation& d, const EvalReport* eval) {
  auto& m = g.meta.metrics;
  m["icad_before"] = format_metric(d.icad_before);
  m["icad_after"] = format_metric(d.icad_after);
  m["mean_shift_sq"] = format_metric(d.theory.mean_shift_sq);
  m["theorem1_bound"] = format_metric(d.theory.theorem1_bound);
  m["theorem2_lhs"] = format_metric(d.theory.theorem2_lhs);
  m["theorem2_rhs"] = format_metric(d.theory.theorem2_rhs);
  m["homophily"] = format_metric(d.homophily);
  if (eval) {
    m["fid"] = format_metric(eval->fid_value);
    m["accuracy_mean"] = format_metric(eval->mean);
    m["accuracy_std"] = format_metric(eval->std);
  }
}

inline void attach_timings(CondensedGraph& g, const std::vector<StageTiming>& timings, double total) {
  std::string per;
  for (const auto& t : timings) {
    if (!per.empty()) per += ",";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s:%.3f", t.stage.c_str(), t.seconds);
    per += buf;
  }
  g.meta.metrics["runtime_total_s"] = format_metric(total);
  g.meta.metrics["runtime_per_stage"] = per;
}

inline PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  PipelineResult r;
  r.distill = distill(data, cfg);
  r.timings = r.distill.timings;
  r.eval = detail::timed_stage("evaluate", r.timings, [&] { return evaluate_condensed(r.distill.condensed, data, cfg); });
  attach_metrics(r.distill.condensed, r.distill, &r.eval);
  r.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace gdist
