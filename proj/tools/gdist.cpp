// gdist: command-line front end for graph distillation.
//
//   gdist gen-sbm  --out-dir DIR [--N ..] [--K ..] [--p ..] [--q ..] [--d ..] [--seed ..]
//   gdist distill  --dataset-dir DIR --out-dir DIR [--config FILE] [--<key> VALUE ...]
//   gdist evaluate --dataset-dir DIR --condensed-dir DIR [--config FILE] [--<key> VALUE ...]
//   gdist fid      --dataset-dir DIR --condensed-dir DIR [--space evaluator|attributes]
//   gdist baseline random|kcenter|herding --dataset-dir DIR --out-dir DIR
//   gdist report   --dir DIR

#include <cstdio>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "gdist/gdist.hpp"

namespace {

using namespace gdist;

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  // One option per config key; values are applied after the config file.
  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : PipelineConfig::keys()) {
      app->add_option_function<std::string>(
          "--" + key, [this, key](const std::string& v) { overrides[key] = v; }, "override config key " + key);
    }
  }

  PipelineConfig build() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& [k, v] : overrides) cfg.set_text(k, v);
    cfg.validate();
    return cfg;
  }
};

void print_kv(const char* key, const std::string& value) { std::printf("%s = %s\n", key, value.c_str()); }
void print_kv(const char* key, double value) { print_kv(key, format_double(value)); }

void print_report(const PipelineResult& r, const CondensedGraph& g) {
  print_kv("n", std::to_string(g.num_nodes()));
  print_kv("ratio", g.meta.ratio);
  print_kv("config_hash", g.meta.config_hash);
  print_kv("homophily", r.distill.homophily);
  print_kv("fid", r.eval.fid_value);
  print_kv("theorem1_bound", r.distill.theory.theorem1_bound);
  print_kv("mean_shift_sq", r.distill.theory.mean_shift_sq);
  print_kv("theorem2_lhs", r.distill.theory.theorem2_lhs);
  print_kv("theorem2_rhs", r.distill.theory.theorem2_rhs);
  print_kv("icad_before", r.distill.icad_before);
  print_kv("icad_after", r.distill.icad_after);
  print_kv("accuracy_mean", r.eval.mean);
  print_kv("accuracy_std", r.eval.std);
  print_kv("runtime_total_s", r.total_seconds);
  std::string per;
  for (const auto& t : r.timings) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%s:%.3f", per.empty() ? "" : ",", t.stage.c_str(), t.seconds);
    per += buf;
  }
  print_kv("runtime_per_stage", per);
}

int cmd_gen_sbm(const SbmSpec& spec, const std::string& out_dir) {
  const Dataset d = generate_sbm(spec);
  save_dataset(d, out_dir);
  print_kv("N", std::to_string(d.num_nodes()));
  print_kv("M", std::to_string(d.graph.num_edges()));
  print_kv("homophily", homophily_ratio(d.graph, d.labels));
  return 0;
}

int cmd_distill(const ConfigFlags& flags, const std::string& dataset_dir, const std::string& out_dir,
                bool record_timing) {
  const PipelineConfig cfg = flags.build();
  const Dataset data = load_dataset(dataset_dir);
  PipelineResult r = run_pipeline(data, cfg);
  CondensedGraph& g = r.distill.condensed;
  if (record_timing) attach_timings(g, r.timings, r.total_seconds);
  save_condensed(g, out_dir);
  print_report(r, g);
  return 0;
}

int cmd_evaluate(const ConfigFlags& flags, const std::string& dataset_dir, const std::string& condensed_dir) {
  const PipelineConfig cfg = flags.build();
  const Dataset data = load_dataset(dataset_dir);
  const CondensedGraph g = load_condensed(condensed_dir);
  const EvalReport rep = evaluate_condensed(g, data, cfg);
  for (std::size_t s = 0; s < rep.accuracies.size(); ++s)
    print_kv(("accuracy_seed_" + std::to_string(s)).c_str(), rep.accuracies[s]);
  print_kv("accuracy_mean", rep.mean);
  print_kv("accuracy_std", rep.std);
  print_kv("fid", rep.fid_value);
  print_kv("runtime_s", rep.runtime_seconds);
  return 0;
}

int cmd_fid(const ConfigFlags& flags, const std::string& dataset_dir, const std::string& condensed_dir,
            const std::string& space) {
  PipelineConfig cfg = flags.build();
  const Dataset data = load_dataset(dataset_dir);
  const CondensedGraph g = load_condensed(condensed_dir);
  if (space == "attributes") {
    const Matrix z = gls_propagate(normalized_adjacency(data.graph), data.features, cfg.propagation());
    print_kv("fid", fid(gaussian_stats(z, cfg.fid_normalize), gaussian_stats(g.x_prime, cfg.fid_normalize)));
    return 0;
  }
  cfg.eval_seeds = 1;
  print_kv("fid", evaluate_condensed(g, data, cfg).fid_value);
  return 0;
}

int cmd_baseline(const ConfigFlags& flags, const std::string& method, const std::string& dataset_dir,
                 const std::string& out_dir) {
  const PipelineConfig cfg = flags.build();
  const Dataset data = load_dataset(dataset_dir);
  const SparseGraph a_norm = normalized_adjacency(data.graph);
  const Matrix z = gls_propagate(a_norm, data.features, cfg.propagation());
  const Index n = condensed_size(cfg, data.num_nodes(), mask_count(data.mask(Split::Train)));
  const CoresetMethod m = method == "random"    ? CoresetMethod::Random
                          : method == "kcenter" ? CoresetMethod::KCenter
                                                : CoresetMethod::Herding;
  CondensedGraph g = coreset(data, a_norm, z, n, cfg.seed, m);
  g.meta.config_hash = cfg.hash();
  const EvalReport rep = evaluate_condensed(g, data, cfg);
  g.meta.metrics["accuracy_mean"] = format_double(rep.mean);
  g.meta.metrics["accuracy_std"] = format_double(rep.std);
  g.meta.metrics["fid"] = format_double(rep.fid_value);
  if (!out_dir.empty()) save_condensed(g, out_dir);
  print_kv("method", method);
  print_kv("n", std::to_string(n));
  print_kv("accuracy_mean", rep.mean);
  print_kv("accuracy_std", rep.std);
  print_kv("fid", rep.fid_value);
  return 0;
}

int cmd_report(const std::string& dir) {
  const FlatTable meta = read_flat_file((fs::path(dir) / "meta.toml").string());
  static const char* keys[] = {"fid",         "theorem1_bound", "theorem2_lhs",  "theorem2_rhs",    "icad_before",
                               "icad_after",  "accuracy_mean",  "accuracy_std",  "runtime_total_s", "runtime_per_stage"};
  for (const char* k : keys) {
    auto it = meta.find(k);
    if (it == meta.end()) {
      print_kv(k, std::string("n/a"));
    } else if (std::holds_alternative<std::string>(it->second)) {
      print_kv(k, std::get<std::string>(it->second));
    } else {
      print_kv(k, format_value(it->second));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph distillation by clustering and class-aware attribute refinement"};
  app.require_subcommand(1);

  SbmSpec spec;
  std::string sbm_out;
  auto* gen = app.add_subcommand("gen-sbm", "write a planted-partition dataset directory");
  gen->add_option("--out-dir", sbm_out)->required();
  gen->add_option("--N", spec.N);
  gen->add_option("--K", spec.K);
  gen->add_option("--p", spec.p);
  gen->add_option("--q", spec.q);
  gen->add_option("--d", spec.d);
  gen->add_option("--separation", spec.separation);
  gen->add_option("--noise", spec.noise);
  gen->add_option("--seed", spec.seed);

  ConfigFlags distill_flags, eval_flags, fid_flags, base_flags;
  std::string dataset_dir, out_dir, condensed_dir, space = "evaluator", method, report_dir;
  bool record_timing = false;

  auto* dis = app.add_subcommand("distill", "condense a dataset and evaluate the result");
  dis->add_option("--dataset-dir", dataset_dir)->required()->check(CLI::ExistingDirectory);
  dis->add_option("--out-dir", out_dir)->required();
  dis->add_flag("--record-timing", record_timing, "store stage runtimes in meta.toml (breaks byte-identical output)");
  distill_flags.attach(dis);

  auto* ev = app.add_subcommand("evaluate", "train the evaluator on a condensed graph, test on the original");
  ev->add_option("--dataset-dir", dataset_dir)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--condensed-dir", condensed_dir)->required()->check(CLI::ExistingDirectory);
  eval_flags.attach(ev);

  auto* fd = app.add_subcommand("fid", "Frechet distance between original and condensed representations");
  fd->add_option("--dataset-dir", dataset_dir)->required()->check(CLI::ExistingDirectory);
  fd->add_option("--condensed-dir", condensed_dir)->required()->check(CLI::ExistingDirectory);
  fd->add_option("--space", space)->check(CLI::IsMember({"evaluator", "attributes"}));
  fid_flags.attach(fd);

  auto* base = app.add_subcommand("baseline", "coreset baseline");
  base->add_option("method", method)->required()->check(CLI::IsMember({"random", "kcenter", "herding"}));
  base->add_option("--dataset-dir", dataset_dir)->required()->check(CLI::ExistingDirectory);
  base->add_option("--out-dir", out_dir);
  base_flags.attach(base);

  auto* rep = app.add_subcommand("report", "print the metric block of a condensed directory");
  rep->add_option("--dir", report_dir)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_sbm(spec, sbm_out);
    if (*dis) return cmd_distill(distill_flags, dataset_dir, out_dir, record_timing);
    if (*ev) return cmd_evaluate(eval_flags, dataset_dir, condensed_dir);
    if (*fd) return cmd_fid(fid_flags, dataset_dir, condensed_dir, space);
    if (*base) return cmd_baseline(base_flags, method, dataset_dir, out_dir);
    if (*rep) return cmd_report(report_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gdist: %s\n", e.what());
    return 1;
  }
  return 0;
}
