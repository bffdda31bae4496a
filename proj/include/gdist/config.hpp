#pragma once

// Pipeline configuration, a flat `key = value` reader/writer, and a stable hash.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <variant>

#include "gdist/caar.hpp"
#include "gdist/cluster.hpp"
#include "gdist/eval.hpp"

namespace gdist {

// ---- flat key/value text ----

using FlatValue = std::variant<bool, std::int64_t, double, std::string>;
using FlatTable = std::map<std::string, FlatValue>;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Keep floats distinguishable from integers on re-read.
  if (std::isfinite(v) && s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_value(const FlatValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, double>) return format_double(x);
        else {
          std::string out = "\"";
          for (char c : x) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
          }
          return out + "\"";
        }
      },
      v);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline FlatValue parse_value(const std::string& raw, const std::string& where) {
  if (raw.empty()) throw Error(where + ": missing value");
  if (raw.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != '"'; ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size()) ++i;
      out += raw[i];
    }
    if (i >= raw.size()) throw Error(where + ": unterminated string");
    if (!trim(std::string_view(raw).substr(i + 1)).empty()) throw Error(where + ": trailing characters after string");
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  const char* first = raw.data();
  const char* last = raw.data() + raw.size();
  if (raw.find_first_of(".eEn") == std::string::npos) {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(first + (raw.front() == '+'), last, i);
    if (ec == std::errc() && p == last) return i;
  }
  double d = 0.0;
  auto [p, ec] = std::from_chars(first + (raw.front() == '+'), last, d);
  if (ec == std::errc() && p == last) return d;
  throw Error(where + ": cannot parse value '" + raw + "'");
}

// Reads `key = value` lines; `#` starts a comment outside strings. Section
// headers are not supported.
inline FlatTable parse_flat(std::istream& in, const std::string& name) {
  FlatTable table;
  std::string line;
  for (Index lineno = 1; std::getline(in, line); ++lineno) {
    const std::string where = name + ":" + std::to_string(lineno);
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line.resize(i);
        break;
      }
    }
    const std::string body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') throw Error(where + ": tables are not supported");
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw Error(where + ": empty key");
    if (table.count(key)) throw Error(where + ": duplicate key '" + key + "'");
    table[key] = parse_value(trim(std::string_view(body).substr(eq + 1)), where);
  }
  return table;
}

inline FlatTable read_flat_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_flat(in, path);
}

inline std::string write_flat(const FlatTable& table) {
  std::string out;
  for (const auto& [k, v] : table) out += k + " = " + format_value(v) + "\n";
  return out;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- pipeline configuration ----

struct PipelineConfig {
  // propagation
  Index T = 5;
  double alpha = 0.8;
  // pretraining head
  Index E1 = 80;
  Index hidden = 256;
  Index depth = 3;
  double dropout = 0.6;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  Index pretrain_batch = 0;
  std::string optimizer = "adam";
  // size of the condensed graph
  double ratio = 0.026;
  Index n = 0;  // overrides ratio when positive
  std::string ratio_base = "all";
  bool inductive = false;
  // clustering
  Index E2 = 300;
  double tol = 1e-4;
  Index n_init = 10;
  Index minibatch_threshold = 50000;
  Index minibatch_size = 1000;
  // refinement
  double beta = 0.01;
  double rho = 0.4;
  Index T_prime = 2;
  double alpha_prime = -1.0;  // negative: reuse alpha
  Index E3 = 2000;
  double gamma = 7.0;
  double lambda = 0.1;
  std::string class_graph_weighting = "adjacency";
  // condensed graph post-processing
  bool clustgdd_x = false;
  double sparsify = 0.0;
  // evaluator
  Index eval_hidden = 256;
  double eval_dropout = 0.5;
  double eval_lr = 0.01;
  double eval_weight_decay = 1e-5;
  Index eval_epochs = 600;
  Index eval_seeds = 1;
  std::string eval_selection = "final";
  bool fid_normalize = true;
  std::uint64_t seed = 0;

  template <class F>
  static void for_each_field(F&& f) {
    f("T", &PipelineConfig::T);
    f("alpha", &PipelineConfig::alpha);
    f("E1", &PipelineConfig::E1);
    f("hidden", &PipelineConfig::hidden);
    f("depth", &PipelineConfig::depth);
    f("dropout", &PipelineConfig::dropout);
    f("learning_rate", &PipelineConfig::learning_rate);
    f("weight_decay", &PipelineConfig::weight_decay);
    f("pretrain_batch", &PipelineConfig::pretrain_batch);
    f("optimizer", &PipelineConfig::optimizer);
    f("ratio", &PipelineConfig::ratio);
    f("n", &PipelineConfig::n);
    f("ratio_base", &PipelineConfig::ratio_base);
    f("inductive", &PipelineConfig::inductive);
    f("E2", &PipelineConfig::E2);
    f("tol", &PipelineConfig::tol);
    f("n_init", &PipelineConfig::n_init);
    f("minibatch_threshold", &PipelineConfig::minibatch_threshold);
    f("minibatch_size", &PipelineConfig::minibatch_size);
    f("beta", &PipelineConfig::beta);
    f("rho", &PipelineConfig::rho);
    f("T_prime", &PipelineConfig::T_prime);
    f("alpha_prime", &PipelineConfig::alpha_prime);
    f("E3", &PipelineConfig::E3);
    f("gamma", &PipelineConfig::gamma);
    f("lambda", &PipelineConfig::lambda);
    f("class_graph_weighting", &PipelineConfig::class_graph_weighting);
    f("clustgdd_x", &PipelineConfig::clustgdd_x);
    f("sparsify", &PipelineConfig::sparsify);
    f("eval_hidden", &PipelineConfig::eval_hidden);
    f("eval_dropout", &PipelineConfig::eval_dropout);
    f("eval_lr", &PipelineConfig::eval_lr);
    f("eval_weight_decay", &PipelineConfig::eval_weight_decay);
    f("eval_epochs", &PipelineConfig::eval_epochs);
    f("eval_seeds", &PipelineConfig::eval_seeds);
    f("eval_selection", &PipelineConfig::eval_selection);
    f("fid_normalize", &PipelineConfig::fid_normalize);
    f("seed", &PipelineConfig::seed);
  }

  static std::vector<std::string> keys() {
    std::vector<std::string> out;
    for_each_field([&](const char* k, auto) { out.emplace_back(k); });
    return out;
  }

  // Sets one field from text (CLI overrides) or a parsed value (files).
  void set(const std::string& key, const FlatValue& value) {
    bool found = false;
    for_each_field([&](const char* k, auto member) {
      if (key != k) return;
      found = true;
      using T = std::decay_t<decltype(this->*member)>;
      auto& slot = this->*member;
      if constexpr (std::is_same_v<T, bool>) {
        if (!std::holds_alternative<bool>(value)) throw Error("config key '" + key + "' expects true/false");
        slot = std::get<bool>(value);
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!std::holds_alternative<std::string>(value)) throw Error("config key '" + key + "' expects a string");
        slot = std::get<std::string>(value);
      } else if constexpr (std::is_same_v<T, double>) {
        if (std::holds_alternative<double>(value)) slot = std::get<double>(value);
        else if (std::holds_alternative<std::int64_t>(value)) slot = static_cast<double>(std::get<std::int64_t>(value));
        else throw Error("config key '" + key + "' expects a number");
      } else {
        if (!std::holds_alternative<std::int64_t>(value)) throw Error("config key '" + key + "' expects an integer");
        const auto v = std::get<std::int64_t>(value);
        if constexpr (std::is_unsigned_v<T>) {
          if (v < 0) throw Error("config key '" + key + "' must be nonnegative");
        }
        slot = static_cast<T>(v);
      }
    });
    if (!found) throw Error("unknown config key '" + key + "'");
  }

  void set_text(const std::string& key, const std::string& text) {
    FlatValue v;
    bool is_string = false;
    for_each_field([&](const char* k, auto member) {
      if (key == k) is_string = std::is_same_v<std::decay_t<decltype(this->*member)>, std::string>;
    });
    v = is_string && (text.empty() || text.front() != '"') ? FlatValue(text) : parse_value(text, "--" + key);
    set(key, v);
  }

  FlatTable to_table() const {
    FlatTable t;
    for_each_field([&](const char* k, auto member) {
      using T = std::decay_t<decltype(this->*member)>;
      const auto& v = this->*member;
      if constexpr (std::is_same_v<T, bool> || std::is_same_v<T, double> || std::is_same_v<T, std::string>)
        t[k] = v;
      else
        t[k] = static_cast<std::int64_t>(v);
    });
    return t;
  }

  static PipelineConfig from_table(const FlatTable& t) {
    PipelineConfig c;
    for (const auto& [k, v] : t) c.set(k, v);
    return c;
  }

  // Hash of the canonical (sorted) serialization; independent of key order in files.
  std::string hash() const { return hex64(fnv1a(write_flat(to_table()))); }

  void validate() const {
    require(alpha >= 0.0 && alpha < 1.0, "alpha must lie in [0, 1)");
    require(alpha_prime < 1.0, "alpha_prime must be below 1");
    require(T >= 0 && T_prime >= 0, "T and T_prime must be nonnegative");
    require(E1 >= 0 && E2 >= 1 && E3 >= 0, "epoch counts must be nonnegative (E2 positive)");
    require(hidden > 0 && depth >= 1, "hidden must be positive and depth at least 1");
    require(dropout >= 0.0 && dropout < 1.0 && eval_dropout >= 0.0 && eval_dropout < 1.0, "dropout must lie in [0, 1)");
    require(n > 0 || (ratio > 0.0 && ratio < 1.0), "ratio must lie in (0, 1)");
    require(ratio_base == "all" || ratio_base == "train", "ratio_base must be 'all' or 'train'");
    require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
    require(gamma >= 0.0 && lambda >= 0.0, "gamma and lambda must be nonnegative");
    require(class_graph_weighting == "adjacency" || class_graph_weighting == "edge_weight",
            "class_graph_weighting must be 'adjacency' or 'edge_weight'");
    require(optimizer == "adam" || optimizer == "gd", "optimizer must be 'adam' or 'gd'");
    require(eval_selection == "final" || eval_selection == "best_val", "eval_selection must be 'final' or 'best_val'");
    require(tol >= 0.0 && n_init >= 1 && minibatch_size >= 1, "invalid clustering knobs");
    require(sparsify >= 0.0, "sparsify must be nonnegative");
    require(eval_seeds >= 1 && eval_epochs >= 0 && eval_hidden > 0, "invalid evaluator knobs");
  }

  OptimizerKind optimizer_kind() const {
    return optimizer == "gd" ? OptimizerKind::GradientDescent : OptimizerKind::Adam;
  }

  PropagationConfig propagation() const { return {alpha, T}; }

  KMeansOptions kmeans() const { return {E2, tol, n_init, minibatch_size}; }

  RefineConfig refine(std::uint64_t refine_seed) const {
    RefineConfig r;
    r.beta = beta;
    r.rho = rho;
    r.t_prime = T_prime;
    if (alpha_prime >= 0.0) r.alpha_prime = alpha_prime;
    r.gamma = gamma;
    r.lambda = lambda;
    r.epochs = E3;
    r.learning_rate = learning_rate;
    r.weight_decay = weight_decay;
    r.seed = refine_seed;
    r.optimizer = optimizer_kind();
    r.weighting = class_graph_weighting == "edge_weight" ? ClassGraphWeighting::EdgeWeight : ClassGraphWeighting::Adjacency;
    return r;
  }

  EvalConfig eval() const {
    EvalConfig e;
    e.hidden = eval_hidden;
    e.dropout = eval_dropout;
    e.learning_rate = eval_lr;
    e.weight_decay = eval_weight_decay;
    e.epochs = eval_epochs;
    e.num_seeds = eval_seeds;
    e.selection = eval_selection == "best_val" ? ModelSelection::BestValidation : ModelSelection::Final;
    return e;
  }
};

inline PipelineConfig load_config(const std::string& path) { return PipelineConfig::from_table(read_flat_file(path)); }

}  // namespace gdist
