#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "test_helpers.hpp"

using namespace fairac;
using testutil::make_graph;

namespace {

double cosine(const Tensor& emb, std::size_t a, std::size_t b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t c = 0; c < emb.cols(); ++c) {
    dot += emb.at(a, c) * emb.at(b, c);
    na += emb.at(a, c) * emb.at(a, c);
    nb += emb.at(b, c) * emb.at(b, c);
  }
  return dot / std::sqrt(na * nb);
}

// Two disjoint 5-cliques: nodes 0-4 and 5-9.
Graph two_cliques() {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t u = 0; u < 5; ++u)
    for (std::uint32_t v = u + 1; v < 5; ++v) {
      edges.emplace_back(u, v);
      edges.emplace_back(u + 5, v + 5);
    }
  return make_graph(10, edges);
}

// Mean within-clique minus mean cross-clique cosine similarity.
double clique_separation(const Tensor& emb) {
  std::vector<double> within, cross;
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = a + 1; b < 10; ++b)
      ((a < 5) == (b < 5) ? within : cross).push_back(cosine(emb, a, b));
  return testutil::mean_of(within) - testutil::mean_of(cross);
}

}  // namespace

TEST_CASE("walks on a two-node path alternate between the endpoints", "[deepwalk]") {
  Graph g = make_graph(2, {{0, 1}});
  Rng rng(12);
  WalkCorpus corpus = generate_walks(g, 3, 3, rng);
  REQUIRE(corpus.walks.size() == 6);
  for (const auto& walk : corpus.walks) {
    REQUIRE(walk.size() == 3);
    for (std::size_t i = 1; i < walk.size(); ++i) REQUIRE(walk[i] != walk[i - 1]);
  }
}

TEST_CASE("isolated nodes produce singleton walks", "[deepwalk]") {
  Graph g = make_graph(3, {{0, 1}});
  Rng rng(5);
  WalkCorpus corpus = generate_walks(g, 2, 10, rng);
  std::size_t singletons = 0;
  for (const auto& walk : corpus.walks)
    if (walk.size() == 1) {
      REQUIRE(walk[0] == 2);
      ++singletons;
    }
  REQUIRE(singletons == 2);  // one per epoch
}

TEST_CASE("consecutive walk entries are graph neighbors", "[deepwalk]") {
  Graph g = two_cliques();
  Rng rng(31);
  WalkCorpus corpus = generate_walks(g, 4, 20, rng);
  for (const auto& walk : corpus.walks)
    for (std::size_t i = 1; i < walk.size(); ++i) {
      const auto& nbrs = g.neighbors(walk[i - 1]);
      REQUIRE(std::find(nbrs.begin(), nbrs.end(), walk[i]) != nbrs.end());
    }
}

TEST_CASE("walk generation is deterministic under a seed", "[deepwalk]") {
  Graph g = two_cliques();
  Rng r1(9), r2(9);
  WalkCorpus c1 = generate_walks(g, 3, 15, r1);
  WalkCorpus c2 = generate_walks(g, 3, 15, r2);
  REQUIRE(c1.walks == c2.walks);
}

TEST_CASE("skip-gram separates two cliques", "[deepwalk]") {
  Graph g = two_cliques();
  DeepwalkConfig cfg;
  cfg.walk_length = 20;
  Rng rng(40);
  Tensor emb = deepwalk_embeddings(g, cfg, rng);
  REQUIRE(emb.rows() == 10);
  REQUIRE(emb.cols() == 64);
  REQUIRE(clique_separation(emb) > 0.0);
}

TEST_CASE("single-node graph trains to a finite 1x64 matrix", "[deepwalk]") {
  Graph g = make_graph(1, {});
  DeepwalkConfig cfg;
  Rng rng(2);
  Tensor emb = deepwalk_embeddings(g, cfg, rng);
  REQUIRE(emb.rows() == 1);
  REQUIRE(emb.cols() == 64);
  for (double v : emb.value()) REQUIRE(std::isfinite(v));
}

TEST_CASE("identical seeds give identical embeddings", "[deepwalk]") {
  Graph g = two_cliques();
  DeepwalkConfig cfg;
  cfg.walk_length = 12;
  Rng r1(77), r2(77);
  Tensor e1 = deepwalk_embeddings(g, cfg, r1);
  Tensor e2 = deepwalk_embeddings(g, cfg, r2);
  REQUIRE(e1.value() == e2.value());
}

TEST_CASE("dim=0 is rejected", "[deepwalk]") {
  Graph g = make_graph(2, {{0, 1}});
  Rng rng(1);
  WalkCorpus corpus = generate_walks(g, 1, 5, rng);
  REQUIRE_THROWS_AS(train_skipgram(corpus, 2, 0, 5, 5, 0.05, rng), std::invalid_argument);
}

TEST_CASE("embedding norms stay bounded", "[deepwalk]") {
  Graph g = two_cliques();
  DeepwalkConfig cfg;
  cfg.walk_length = 40;
  Rng rng(13);
  Tensor emb = deepwalk_embeddings(g, cfg, rng);
  for (double v : emb.value()) REQUIRE(std::abs(v) < 1e3);
}

TEST_CASE("cache round-trips bit-identically and serves repeat calls", "[deepwalk]") {
  namespace fs = std::filesystem;
  Graph g = two_cliques();
  DeepwalkConfig cfg;
  cfg.walk_length = 10;
  const std::string dir = (fs::temp_directory_path() / "fairac_tests" / "topo_cache").string();
  fs::remove_all(dir);
  Tensor first = topo_embeddings_cached(dir, "cliques", 40, g, cfg);
  REQUIRE(fs::exists(fs::path(dir) / "cliques_seed40.topo"));
  Tensor second = topo_embeddings_cached(dir, "cliques", 40, g, cfg);
  REQUIRE(first.value() == second.value());
  // direct save/load round trip
  const std::string path = dir + "/direct.topo";
  save_matrix(path, first);
  Tensor loaded = load_matrix(path);
  REQUIRE(loaded.value() == first.value());
  REQUIRE(loaded.rows() == first.rows());
}
