#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairac/graph.hpp"
#include "fairac/rng.hpp"
#include "fairac/tensor.hpp"

namespace fairac {

// Structure-only node embeddings: truncated uniform random walks fed to
// skip-gram with negative sampling. Single-threaded on purpose - update order
// is part of the deterministic contract.

struct DeepwalkConfig {
  std::size_t walks_per_node = 10;  // "10 epochs" read as 10 walks per start node
  std::size_t walk_length = 100;
  std::size_t dim = 64;
  std::size_t window = 5;
  std::size_t negatives = 5;
  double lr = 0.05;
};

struct WalkCorpus {
  std::vector<std::vector<std::uint32_t>> walks;
};

// One pass per walks_per_node epoch, start nodes shuffled each epoch. Walks
// truncate early only at nodes with no neighbors, so isolated nodes yield
// singleton walks.
inline WalkCorpus generate_walks(const Graph& g, std::size_t walks_per_node,
                                 std::size_t walk_length, Rng& rng) {
  if (g.n_nodes == 0) throw std::invalid_argument("generate_walks: empty graph");
  if (walk_length == 0) throw std::invalid_argument("generate_walks: walk_length must be positive");
  WalkCorpus corpus;
  corpus.walks.reserve(g.n_nodes * walks_per_node);
  std::vector<std::uint32_t> starts = identity_ordering(g.n_nodes);
  for (std::size_t epoch = 0; epoch < walks_per_node; ++epoch) {
    rng.shuffle(starts);
    for (std::uint32_t start : starts) {
      std::vector<std::uint32_t> walk;
      walk.reserve(walk_length);
      std::uint32_t cur = start;
      walk.push_back(cur);
      while (walk.size() < walk_length) {
        const auto& nbrs = g.neighbors(cur);
        if (nbrs.empty()) break;
        cur = nbrs[rng.uniform_index(nbrs.size())];
        walk.push_back(cur);
      }
      corpus.walks.push_back(std::move(walk));
    }
  }
  return corpus;
}

// Skip-gram with negative sampling over all (center, context) pairs within
// the window. Negatives come from the corpus unigram distribution raised to
// the 3/4 power; a draw equal to the positive context is skipped. Returns the
// input-side embedding matrix (n_nodes x dim).
inline Tensor train_skipgram(const WalkCorpus& corpus, std::size_t n_nodes, std::size_t dim,
                             std::size_t window, std::size_t negatives, double lr, Rng& rng) {
  if (corpus.walks.empty()) throw std::invalid_argument("train_skipgram: empty corpus");
  if (dim == 0) throw std::invalid_argument("train_skipgram: dim must be positive");

  std::vector<double> counts(n_nodes, 0.0);
  for (const auto& walk : corpus.walks)
    for (std::uint32_t u : walk) {
      if (u >= n_nodes) throw std::out_of_range("train_skipgram: walk token out of range");
      counts[u] += 1.0;
    }
  std::vector<double> noise_cdf(n_nodes, 0.0);
  double total = 0.0;
  for (std::size_t u = 0; u < n_nodes; ++u) {
    total += std::pow(counts[u], 0.75);
    noise_cdf[u] = total;
  }
  auto sample_noise = [&]() -> std::uint32_t {
    const double x = rng.uniform() * total;
    const auto it = std::lower_bound(noise_cdf.begin(), noise_cdf.end(), x);
    return static_cast<std::uint32_t>(it - noise_cdf.begin());
  };

  Tensor emb(n_nodes, dim);
  std::vector<double> out(n_nodes * dim, 0.0);
  for (double& v : emb.value()) v = rng.uniform(-0.5 / static_cast<double>(dim),
                                                0.5 / static_cast<double>(dim));

  std::vector<double> accum(dim);
  for (const auto& walk : corpus.walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      const std::uint32_t center = walk[i];
      double* u = emb.value().data() + center * dim;
      const std::size_t lo = i >= window ? i - window : 0;
      const std::size_t hi = std::min(walk.size(), i + window + 1);
      for (std::size_t j = lo; j < hi; ++j) {
        if (j == i) continue;
        const std::uint32_t context = walk[j];
        std::fill(accum.begin(), accum.end(), 0.0);
        for (std::size_t s = 0; s <= negatives; ++s) {
          std::uint32_t target;
          double label;
          if (s == 0) {
            target = context;
            label = 1.0;
          } else {
            target = sample_noise();
            if (target == context) continue;
            label = 0.0;
          }
          double* v = out.data() + target * dim;
          double dot = 0.0;
          for (std::size_t k = 0; k < dim; ++k) dot += u[k] * v[k];
          const double grad = (label - detail::stable_sigmoid(dot)) * lr;
          for (std::size_t k = 0; k < dim; ++k) {
            accum[k] += grad * v[k];
            v[k] += grad * u[k];
          }
        }
        for (std::size_t k = 0; k < dim; ++k) u[k] += accum[k];
      }
    }
  }
  return emb;
}

inline Tensor deepwalk_embeddings(const Graph& g, const DeepwalkConfig& cfg, Rng& rng) {
  WalkCorpus corpus = generate_walks(g, cfg.walks_per_node, cfg.walk_length, rng);
  return train_skipgram(corpus, g.n_nodes, cfg.dim, cfg.window, cfg.negatives, cfg.lr, rng);
}

// --- embedding cache -------------------------------------------------------
// Binary layout: magic "FACTOPO1", u64 rows, u64 cols, row-major doubles.
// Keyed by (dataset name, seed); topology does not depend on the attribute
// mask, so one cache entry serves every alpha.

inline void save_matrix(const std::string& path, const Tensor& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cache: cannot write " + path);
  const char magic[8] = {'F', 'A', 'C', 'T', 'O', 'P', 'O', '1'};
  out.write(magic, 8);
  const std::uint64_t r = m.rows(), c = m.cols();
  out.write(reinterpret_cast<const char*>(&r), 8);
  out.write(reinterpret_cast<const char*>(&c), 8);
  out.write(reinterpret_cast<const char*>(m.value().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Tensor load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cache: cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "FACTOPO1", 8) != 0)
    throw std::runtime_error("cache: bad magic in " + path);
  std::uint64_t r = 0, c = 0;
  in.read(reinterpret_cast<char*>(&r), 8);
  in.read(reinterpret_cast<char*>(&c), 8);
  Tensor m(r, c);
  in.read(reinterpret_cast<char*>(m.value().data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw std::runtime_error("cache: truncated file " + path);
  return m;
}

inline Tensor topo_embeddings_cached(const std::string& cache_dir, const std::string& dataset,
                                     std::uint64_t seed, const Graph& g,
                                     const DeepwalkConfig& cfg) {
  namespace fs = std::filesystem;
  if (cache_dir.empty()) {
    Rng rng = Rng::forked(seed, /*stream=*/2);
    return deepwalk_embeddings(g, cfg, rng);
  }
  fs::create_directories(cache_dir);
  const std::string path =
      (fs::path(cache_dir) / (dataset + "_seed" + std::to_string(seed) + ".topo")).string();
  if (fs::exists(path)) {
    Tensor m = load_matrix(path);
    if (m.rows() == g.n_nodes && m.cols() == cfg.dim) return m;
  }
  Rng rng = Rng::forked(seed, /*stream=*/2);
  Tensor m = deepwalk_embeddings(g, cfg, rng);
  save_matrix(path, m);
  return m;
}

}  // namespace fairac
