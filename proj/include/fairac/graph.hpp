#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fairac/rng.hpp"
#include "fairac/tensor.hpp"

namespace fairac {

inline constexpr std::int8_t kUnlabeled = -1;

// In-memory graph shared by every stage of the pipeline. Immutable after
// finalize(); loaders are the only writers.
struct Graph {
  std::size_t n_nodes = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // undirected, u < v, deduplicated
  Tensor features;                                             // n_nodes x d
  std::vector<std::uint8_t> feature_present;                   // 0/1 per node
  std::vector<std::int8_t> sensitive;                          // 0/1 per node, always observed
  std::vector<std::int8_t> labels;                             // 0/1 or kUnlabeled

  std::size_t feature_dim() const { return features.cols(); }

  // Builds sorted adjacency lists and validates the structural invariants.
  void finalize() {
    if (features.rows() != n_nodes || feature_present.size() != n_nodes ||
        sensitive.size() != n_nodes || labels.size() != n_nodes)
      throw std::invalid_argument("Graph::finalize: per-node arrays disagree with n_nodes");
    adjacency_.assign(n_nodes, {});
    for (auto& [u, v] : edges) {
      if (u >= n_nodes || v >= n_nodes)
        throw std::out_of_range("Graph::finalize: edge endpoint " +
                                std::to_string(std::max(u, v)) + " out of range");
      if (u == v) throw std::invalid_argument("Graph::finalize: self-loop stored");
      if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& [u, v] : edges) {
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
    finalized_ = true;
  }

  // All v with {u, v} in edges, ascending.
  const std::vector<std::uint32_t>& neighbors(std::uint32_t u) const {
    if (!finalized_) throw std::logic_error("Graph::neighbors: graph not finalized");
    if (u >= n_nodes)
      throw std::out_of_range("Graph::neighbors: node " + std::to_string(u) + " out of range");
    return adjacency_[u];
  }

  bool finalized() const { return finalized_; }

 private:
  std::vector<std::vector<std::uint32_t>> adjacency_;
  bool finalized_ = false;
};

// Positional 25 / 50 / 25 split: the first quarter of the given ordering
// trains the completion model, the next half the downstream classifier, the
// remainder is held out. Sizes are floor(n/4), floor(n/2), remainder.
struct DataSplit {
  std::vector<std::uint32_t> ac_train;
  std::vector<std::uint32_t> gnn_train;
  std::vector<std::uint32_t> test;
};

inline DataSplit make_split(std::size_t n_nodes, const std::vector<std::uint32_t>& ordering) {
  if (n_nodes < 4) throw std::invalid_argument("make_split: need at least 4 nodes");
  if (ordering.size() != n_nodes)
    throw std::invalid_argument("make_split: ordering size differs from n_nodes");
  std::vector<std::uint8_t> seen(n_nodes, 0);
  for (std::uint32_t u : ordering) {
    if (u >= n_nodes || seen[u]) throw std::invalid_argument("make_split: ordering is not a permutation");
    seen[u] = 1;
  }
  const std::size_t n_ac = n_nodes / 4;
  const std::size_t n_gnn = n_nodes / 2;
  DataSplit s;
  s.ac_train.assign(ordering.begin(), ordering.begin() + n_ac);
  s.gnn_train.assign(ordering.begin() + n_ac, ordering.begin() + n_ac + n_gnn);
  s.test.assign(ordering.begin() + n_ac + n_gnn, ordering.end());
  return s;
}

inline std::vector<std::uint32_t> identity_ordering(std::size_t n) {
  std::vector<std::uint32_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint32_t>(i);
  return v;
}

// Per-epoch division of the attribute-complete training nodes into a kept set
// (reconstruction targets) and an artificially dropped set (completion
// targets). drop holds round(alpha * |candidates|) nodes, chosen uniformly.
struct DropPlan {
  std::vector<std::uint32_t> keep;
  std::vector<std::uint32_t> drop;
  double alpha = 0.0;
};

inline DropPlan sample_drop_plan(const std::vector<std::uint32_t>& candidates, double alpha,
                                 Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("sample_drop_plan: no candidates");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("sample_drop_plan: alpha out of [0,1]");
  const std::size_t n_drop = static_cast<std::size_t>(
      std::llround(alpha * static_cast<double>(candidates.size())));
  std::vector<std::uint32_t> pool = candidates;
  // Partial Fisher-Yates: the first n_drop slots become the drop set.
  for (std::size_t i = 0; i < n_drop && i + 1 < pool.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  DropPlan plan;
  plan.alpha = alpha;
  plan.drop.assign(pool.begin(), pool.begin() + n_drop);
  plan.keep.assign(pool.begin() + n_drop, pool.end());
  std::sort(plan.drop.begin(), plan.drop.end());
  std::sort(plan.keep.begin(), plan.keep.end());
  return plan;
}

}  // namespace fairac
