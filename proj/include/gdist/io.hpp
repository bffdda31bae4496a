#pragma once

// Dataset and condensed-graph directories on disk.
//
// Dataset: edges.tsv, features.csv, labels.txt, masks.txt, meta.toml (N, M, d, K).
// Condensed: x_prime.csv, a_prime.csv, y_prime.txt, meta.toml.

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gdist/condense.hpp"
#include "gdist/config.hpp"
#include "gdist/graph.hpp"

namespace gdist {

namespace fs = std::filesystem;

namespace detail {

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

inline std::string where(const fs::path& p, Index line) { return p.string() + ":" + std::to_string(line); }

inline Index parse_index(std::string_view tok, const std::string& at) {
  Index v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) throw Error(at + ": expected an integer, got '" + std::string(tok) + "'");
  return v;
}

inline double parse_double(std::string_view tok, const std::string& at) {
  double v = 0.0;
  const char* b = tok.data();
  if (!tok.empty() && tok.front() == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) throw Error(at + ": expected a number, got '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Dense comma-separated matrix; every row must have the same width.
inline Matrix read_csv(const fs::path& p, Index expect_rows = -1, Index expect_cols = -1) {
  auto in = open_in(p);
  std::vector<std::vector<double>> rows;
  std::string line;
  for (Index ln = 1; std::getline(in, line); ++ln) {
    if (trim(line).empty()) continue;
    const auto at = where(p, ln);
    std::vector<double> row;
    for (const auto& tok : split(line, ',')) row.push_back(parse_double(tok, at));
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(at + ": expected " + std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
    if (expect_cols >= 0 && static_cast<Index>(row.size()) != expect_cols)
      throw Error(at + ": expected " + std::to_string(expect_cols) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (expect_rows >= 0 && static_cast<Index>(rows.size()) != expect_rows)
    throw Error(p.string() + ": expected " + std::to_string(expect_rows) + " rows, got " + std::to_string(rows.size()));
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? std::max<Index>(expect_cols, 0) : static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline void write_csv(const fs::path& p, const Matrix& m) {
  auto out = open_out(p);
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    out << line << '\n';
  }
}

inline std::vector<Index> read_ints(const fs::path& p, Index expect) {
  auto in = open_in(p);
  std::vector<Index> out;
  std::string line;
  for (Index ln = 1; std::getline(in, line); ++ln) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    out.push_back(parse_index(t, where(p, ln)));
  }
  if (expect >= 0 && static_cast<Index>(out.size()) != expect)
    throw Error(p.string() + ": expected " + std::to_string(expect) + " lines, got " + std::to_string(out.size()));
  return out;
}

inline std::int64_t table_int(const FlatTable& t, const std::string& key, const fs::path& p) {
  auto it = t.find(key);
  if (it == t.end() || !std::holds_alternative<std::int64_t>(it->second))
    throw Error(p.string() + ": missing integer key '" + key + "'");
  return std::get<std::int64_t>(it->second);
}

}  // namespace detail

// Reads a dataset directory. Self-loops are dropped and repeated edges merged;
// meta M must equal the number of edge lines.
inline Dataset load_dataset(const fs::path& dir) {
  const auto meta_path = dir / "meta.toml";
  const FlatTable meta = read_flat_file(meta_path.string());
  const Index N = detail::table_int(meta, "N", meta_path);
  const Index M = detail::table_int(meta, "M", meta_path);
  const Index d = detail::table_int(meta, "d", meta_path);
  const Index K = detail::table_int(meta, "K", meta_path);
  require(N > 0 && M >= 0 && d > 0 && K > 0, meta_path.string() + ": N, d, K must be positive");

  Dataset data;
  data.name = dir.filename().string();
  if (auto it = meta.find("name"); it != meta.end() && std::holds_alternative<std::string>(it->second))
    data.name = std::get<std::string>(it->second);
  data.num_classes = K;

  const auto edge_path = dir / "edges.tsv";
  auto in = detail::open_in(edge_path);
  std::vector<Edge> edges;
  std::string line;
  Index lines = 0;
  for (Index ln = 1; std::getline(in, line); ++ln) {
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a)) continue;
    const auto at = detail::where(edge_path, ln);
    if (!(ss >> b) || (ss >> extra)) throw Error(at + ": expected two node ids");
    const Index u = detail::parse_index(a, at), v = detail::parse_index(b, at);
    if (u < 0 || u >= N || v < 0 || v >= N) throw Error(at + ": node id out of range [0, " + std::to_string(N) + ")");
    edges.push_back({u, v, 1.0});
    ++lines;
  }
  if (lines != M)
    throw Error(edge_path.string() + ": meta says M = " + std::to_string(M) + " but file has " + std::to_string(lines) + " edges");
  data.graph = SparseGraph::from_edges(N, edges);

  data.features = detail::read_csv(dir / "features.csv", N, d);
  data.labels = detail::read_ints(dir / "labels.txt", N);
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    if (data.labels[i] < 0 || data.labels[i] >= K)
      throw Error((dir / "labels.txt").string() + ":" + std::to_string(i + 1) + ": label out of range");

  const auto mask_path = dir / "masks.txt";
  auto mi = detail::open_in(mask_path);
  for (Index ln = 1; std::getline(mi, line); ++ln) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto at = detail::where(mask_path, ln);
    if (t.find_first_of(" \t,") != std::string::npos) throw Error(at + ": node in more than one split ('" + t + "')");
    if (t == "train") data.splits.push_back(Split::Train);
    else if (t == "val") data.splits.push_back(Split::Val);
    else if (t == "test") data.splits.push_back(Split::Test);
    else if (t == "none") data.splits.push_back(Split::None);
    else throw Error(at + ": unknown split '" + t + "'");
  }
  if (static_cast<Index>(data.splits.size()) != N)
    throw Error(mask_path.string() + ": expected " + std::to_string(N) + " lines, got " + std::to_string(data.splits.size()));
  data.validate();
  return data;
}

inline void save_dataset(const Dataset& data, const fs::path& dir) {
  data.validate();
  fs::create_directories(dir);
  {
    auto out = detail::open_out(dir / "edges.tsv");
    for (const auto& e : data.graph.edge_list()) out << e.u << '\t' << e.v << '\n';
  }
  detail::write_csv(dir / "features.csv", data.features);
  {
    auto out = detail::open_out(dir / "labels.txt");
    for (Index y : data.labels) out << y << '\n';
  }
  {
    auto out = detail::open_out(dir / "masks.txt");
    for (Split s : data.splits) out << split_name(s) << '\n';
  }
  FlatTable meta{{"N", std::int64_t{data.num_nodes()}},
                 {"M", std::int64_t{data.graph.num_edges()}},
                 {"d", std::int64_t{data.features.cols()}},
                 {"K", std::int64_t{data.num_classes}},
                 {"name", data.name}};
  detail::open_out(dir / "meta.toml") << write_flat(meta);
}

// Metadata keys reserved by the condensed format; everything else in meta.toml is a metric.
inline bool is_core_meta_key(const std::string& k) {
  return k == "source" || k == "ratio" || k == "seed" || k == "config_hash" || k == "n" || k == "d" ||
         k == "num_classes";
}

// Numbers and booleans are written bare, anything else quoted.
inline FlatValue metric_value(const std::string& text) {
  try {
    FlatValue v = parse_value(text, "metric");
    if (!std::holds_alternative<std::string>(v)) return v;
  } catch (const Error&) {
  }
  return text;
}

inline void save_condensed(const CondensedGraph& g, const fs::path& dir) {
  g.validate();
  fs::create_directories(dir);
  detail::write_csv(dir / "x_prime.csv", g.x_prime);
  detail::write_csv(dir / "a_prime.csv", g.a_prime);
  {
    auto out = detail::open_out(dir / "y_prime.txt");
    for (Index y : g.y_prime) out << y << '\n';
  }
  FlatTable meta{{"source", g.meta.source},
                 {"ratio", g.meta.ratio},
                 {"seed", static_cast<std::int64_t>(g.meta.seed)},
                 {"config_hash", g.meta.config_hash},
                 {"n", std::int64_t{g.num_nodes()}},
                 {"d", std::int64_t{g.x_prime.cols()}},
                 {"num_classes", std::int64_t{g.num_classes}}};
  for (const auto& [k, v] : g.meta.metrics) {
    if (is_core_meta_key(k)) throw Error("metric key '" + k + "' collides with a reserved meta key");
    meta[k] = metric_value(v);
  }
  detail::open_out(dir / "meta.toml") << write_flat(meta);
}

inline CondensedGraph load_condensed(const fs::path& dir) {
  const auto meta_path = dir / "meta.toml";
  const FlatTable meta = read_flat_file(meta_path.string());
  CondensedGraph g;
  const Index n = detail::table_int(meta, "n", meta_path);
  const Index d = detail::table_int(meta, "d", meta_path);
  g.num_classes = detail::table_int(meta, "num_classes", meta_path);
  g.x_prime = detail::read_csv(dir / "x_prime.csv", n, d);
  g.a_prime = detail::read_csv(dir / "a_prime.csv", n, n);
  g.y_prime = detail::read_ints(dir / "y_prime.txt", n);
  for (const auto& [k, v] : meta) {
    if (k == "source") g.meta.source = std::get<std::string>(v);
    else if (k == "ratio") g.meta.ratio = std::holds_alternative<double>(v) ? std::get<double>(v) : static_cast<double>(std::get<std::int64_t>(v));
    else if (k == "seed") g.meta.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v));
    else if (k == "config_hash") g.meta.config_hash = std::get<std::string>(v);
    else if (!is_core_meta_key(k)) g.meta.metrics[k] = std::holds_alternative<std::string>(v) ? std::get<std::string>(v) : format_value(v);
  }
  g.validate();
  return g;
}

}  // namespace gdist
