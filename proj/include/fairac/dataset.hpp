#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairac/graph.hpp"
#include "fairac/rng.hpp"

namespace fairac {

// One entry per shipped dataset; the concrete files follow the FairGNN /
// PyGDebias release layout (node CSV + edge list). min_* are the per-dataset
// floors on usable training data.
struct DatasetSpec {
  std::string name;
  std::string node_path;
  std::string edge_path;
  std::string sensitive_col;
  std::string label_col;
  std::vector<std::string> drop_cols;  // excluded from features in addition to id/sensitive/label
  std::size_t min_ac_train = 1;
  std::size_t min_sens_train = 1;
  double default_beta = 1.0;
};

struct RawTable {
  std::vector<std::string> header;       // excludes the id column
  std::vector<std::string> ids;          // first column, file order
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("dataset: cannot parse numeric value '" + s + "' in " + context);
  }
}

}  // namespace detail

// Node CSV: header row; one row per node; first column is the node id, all
// remaining columns numeric.
inline RawTable read_node_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open node file " + path);
  RawTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty node file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw std::runtime_error("dataset: node file needs id plus attributes");
  table.header.assign(header.begin() + 1, header.end());
  std::set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("dataset: row " + std::to_string(line_no) + " in " + path +
                               " has " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    if (!seen_ids.insert(cells[0]).second)
      throw std::runtime_error("dataset: duplicate node id " + cells[0] + " in " + path);
    table.ids.push_back(cells[0]);
    std::vector<double> row(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c)
      row[c - 1] = detail::parse_number(cells[c], path + ":" + std::to_string(line_no));
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Maps a raw sensitive column onto {0,1}. Already-binary columns pass
// through; "age" thresholds at 21 (younger than 21 -> 1); any other column
// with exactly two distinct values maps min -> 0, max -> 1.
inline std::vector<std::int8_t> binarize_sensitive(const std::vector<double>& values,
                                                   const std::string& attribute) {
  if (values.empty()) throw std::invalid_argument("binarize_sensitive: empty column");
  std::string attr = attribute;
  std::transform(attr.begin(), attr.end(), attr.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::vector<std::int8_t> out(values.size());
  if (attr == "age") {
    bool already_binary = true;
    for (double v : values)
      if (v != 0.0 && v != 1.0) { already_binary = false; break; }
    if (!already_binary) {
      for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = values[i] < 21.0 ? 1 : 0;
      std::set<std::int8_t> groups(out.begin(), out.end());
      if (groups.size() != 2)
        throw std::runtime_error("binarize_sensitive: degenerate sensitive column '" + attribute +
                                 "' (one group empty after binarization)");
      return out;
    }
  }
  std::set<double> distinct(values.begin(), values.end());
  if (distinct.size() == 1)
    throw std::runtime_error("binarize_sensitive: degenerate sensitive column '" + attribute +
                             "' (constant)");
  if (distinct.size() > 2)
    throw std::runtime_error("binarize_sensitive: column '" + attribute + "' has " +
                             std::to_string(distinct.size()) + " distinct values after mapping");
  const double lo = *distinct.begin();
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] == lo ? 0 : 1;
  return out;
}

// Column-wise min-max over nodes with feature_present = 1 only; constant
// columns map to 0. Rows of absent nodes are zeroed afterwards so placeholder
// rows stay all-zero.
inline void normalize_features(Graph& g) {
  const std::size_t d = g.feature_dim();
  std::vector<double>& x = g.features.value();
  for (std::size_t c = 0; c < d; ++c) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t r = 0; r < g.n_nodes; ++r) {
      if (!g.feature_present[r]) continue;
      const double v = x[r * d + c];
      if (!any) { lo = hi = v; any = true; }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < g.n_nodes; ++r) {
      double& v = x[r * d + c];
      v = span > 0.0 ? (v - lo) / span : 0.0;
    }
  }
  for (std::size_t r = 0; r < g.n_nodes; ++r)
    if (!g.feature_present[r])
      std::fill_n(x.begin() + static_cast<std::ptrdiff_t>(r * d), d, 0.0);
}

// Loads one dataset: node CSV + edge list -> finalized Graph with dense node
// indices in file order, sensitive/label columns stripped from the feature
// matrix, and features min-max normalized over observed nodes.
// Label convention (FairGNN / PyGDebias): negative -> unlabeled, > 1 -> 1.
inline Graph load_dataset(const DatasetSpec& spec) {
  RawTable table = read_node_csv(spec.node_path);
  const std::size_t n = table.ids.size();
  if (n == 0) throw std::runtime_error("dataset: no nodes in " + spec.node_path);

  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
      if (table.header[i] == name) return i;
    throw std::runtime_error("dataset: column '" + name + "' not found in " + spec.node_path);
  };
  const std::size_t sens_c = col_index(spec.sensitive_col);
  const std::size_t label_c = col_index(spec.label_col);
  std::set<std::size_t> excluded{sens_c, label_c};
  for (const auto& name : spec.drop_cols) excluded.insert(col_index(name));

  Graph g;
  g.n_nodes = n;
  std::vector<double> sens_raw(n);
  g.labels.resize(n);
  const std::size_t d = table.header.size() - excluded.size();
  g.features = Tensor(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    sens_raw[r] = table.rows[r][sens_c];
    const double y = table.rows[r][label_c];
    g.labels[r] = y < 0.0 ? kUnlabeled : (y > 1.0 ? 1 : static_cast<std::int8_t>(y));
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (excluded.count(c)) continue;
      g.features.at(r, out_c++) = table.rows[r][c];
    }
  }
  g.sensitive = binarize_sensitive(sens_raw, spec.sensitive_col);
  g.feature_present.assign(n, 1);

  std::unordered_map<std::string, std::uint32_t> id_of;
  id_of.reserve(n);
  for (std::size_t r = 0; r < n; ++r) id_of.emplace(table.ids[r], static_cast<std::uint32_t>(r));

  std::ifstream ein(spec.edge_path);
  if (!ein) throw std::runtime_error("dataset: cannot open edge file " + spec.edge_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ein, line)) {
    ++line_no;
    for (char& ch : line)
      if (ch == ',' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    std::string a, b;
    if (!(ss >> a)) continue;  // blank line
    if (!(ss >> b))
      throw std::runtime_error("dataset: edge line " + std::to_string(line_no) +
                               " has a single endpoint");
    auto ia = id_of.find(a), ib = id_of.find(b);
    if (ia == id_of.end())
      throw std::runtime_error("dataset: edge file references unknown node id '" + a + "'");
    if (ib == id_of.end())
      throw std::runtime_error("dataset: edge file references unknown node id '" + b + "'");
    std::uint32_t u = ia->second, v = ib->second;
    if (u == v) continue;  // self-loops only appear during adjacency normalization
    if (u > v) std::swap(u, v);
    g.edges.emplace_back(u, v);
  }

  normalize_features(g);
  g.finalize();
  return g;
}

// Marks a uniform round(alpha * n) subset of nodes attribute-missing, zeroes
// their feature rows, and re-normalizes the surviving columns so masked nodes
// never contribute to normalization statistics.
inline void apply_missing(Graph& g, double alpha, Rng& rng) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("apply_missing: alpha must be in [0, 1)");
  if (alpha == 0.0) return;
  const std::size_t n_mask = static_cast<std::size_t>(
      std::llround(alpha * static_cast<double>(g.n_nodes)));
  std::vector<std::uint32_t> order = identity_ordering(g.n_nodes);
  for (std::size_t i = 0; i < n_mask && i + 1 < order.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(order.size() - i));
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < n_mask; ++i) g.feature_present[order[i]] = 0;
  normalize_features(g);
}

}  // namespace fairac
