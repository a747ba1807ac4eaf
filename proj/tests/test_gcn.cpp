#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace fairac;
using testutil::make_graph;

TEST_CASE("normalized adjacency on tiny graphs", "[gcn]") {
  SECTION("single node is the 1x1 identity") {
    Graph g = make_graph(1, {});
    NormalizedAdjacency adj = normalize_adjacency(g);
    REQUIRE(adj.m.at(0, 0) == 1.0);
  }
  SECTION("two connected nodes give all entries 0.5") {
    Graph g = make_graph(2, {{0, 1}});
    NormalizedAdjacency adj = normalize_adjacency(g);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) REQUIRE(adj.m.at(r, c) == Catch::Approx(0.5));
  }
  SECTION("row sums are one on a regular graph") {
    // 4-cycle: every node has degree 2, so A+I rows have 3 entries of 1/3.
    Graph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    NormalizedAdjacency adj = normalize_adjacency(g);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 4; ++c) sum += adj.m.at(r, c);
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("normalized adjacency is symmetric with entries in [0,1]", "[gcn]") {
  Rng rng(21);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  const std::uint32_t n = 15;
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(0.25)) edges.emplace_back(u, v);
  Graph g = make_graph(n, edges);
  NormalizedAdjacency adj = normalize_adjacency(g);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double v = adj.m.at(r, c);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      REQUIRE(std::abs(v - adj.m.at(c, r)) <= 1e-12);
    }
}

TEST_CASE("normalized adjacency spectral radius is at most one", "[gcn]") {
  Rng rng(33);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  const std::uint32_t n = 12;
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(0.3)) edges.emplace_back(u, v);
  Graph g = make_graph(n, edges);
  NormalizedAdjacency adj = normalize_adjacency(g);
  // power iteration
  Tensor x(n, 1);
  for (double& v : x.value()) v = rng.uniform(0.1, 1.0);
  double lambda = 0.0;
  Tape tape;
  for (int it = 0; it < 200; ++it) {
    Tensor y = spmm(tape, adj.m, x);
    double norm = 0.0;
    for (double v : y.value()) norm += v * v;
    norm = std::sqrt(norm);
    lambda = norm;
    double xnorm = 0.0;
    for (double v : x.value()) xnorm += v * v;
    lambda = norm / std::sqrt(xnorm);
    for (std::size_t i = 0; i < x.size(); ++i) x.value()[i] = y.value()[i] / norm;
  }
  REQUIRE(lambda <= 1.0 + 1e-9);
}

TEST_CASE("gcn predictions at zero weights are all 0.5 scored, class 0", "[gcn]") {
  Graph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(2);
  GcnModel model(3, rng);
  for (Tensor p : model.parameters())
    for (double& v : p.value()) v = 0.0;
  Tensor emb(4, 3, 0.3);
  Prediction p = gcn_predict(model, emb, adj, {0, 1, 2, 3});
  REQUIRE(p.scores.size() == 4);
  for (double s : p.scores) REQUIRE(s == 0.5);
  for (std::int8_t c : p.preds) REQUIRE(c == 0);  // strict > breaks the tie to 0
}

TEST_CASE("gcn scores are monotone in the final-layer bias", "[gcn]") {
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(14);
  GcnModel model(4, rng);
  Tensor emb = testutil::random_tensor(5, 4, rng, false);
  Prediction base = gcn_predict(model, emb, adj, {0, 1, 2, 3, 4});
  model.b2.value()[0] += 1.0;
  Prediction shifted = gcn_predict(model, emb, adj, {0, 1, 2, 3, 4});
  for (std::size_t i = 0; i < base.scores.size(); ++i)
    REQUIRE(shifted.scores[i] > base.scores[i]);
}

TEST_CASE("train_gcn fits a linearly separable toy instance", "[gcn]") {
  const std::uint32_t n = 24;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
  Graph g = make_graph(n, edges);
  NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(5);
  Tensor emb(n, 6);
  std::vector<std::int8_t> labels(n, 0);
  std::vector<std::uint32_t> train_nodes;
  for (std::uint32_t u = 0; u < n; ++u) {
    labels[u] = u % 2 == 0 ? 1 : 0;
    emb.at(u, 0) = labels[u] == 1 ? 2.0 : -2.0;
    for (std::size_t c = 1; c < 6; ++c) emb.at(u, c) = rng.uniform(-0.2, 0.2);
    train_nodes.push_back(u);
  }
  Rng train_rng(40);
  GcnModel model = train_gcn(emb, adj, labels, train_nodes, 300, train_rng);
  Prediction p = gcn_predict(model, emb, adj, train_nodes);
  std::vector<std::int8_t> yl(labels.begin(), labels.end());
  REQUIRE(accuracy(p.preds, yl) >= 0.95);
}

TEST_CASE("train_gcn with zero epochs returns the seeded init", "[gcn]") {
  Graph g = make_graph(4, {{0, 1}, {2, 3}});
  NormalizedAdjacency adj = normalize_adjacency(g);
  Tensor emb(4, 3, 0.1);
  std::vector<std::int8_t> labels{1, 0, 1, 0};
  Rng r1(9), r2(9);
  GcnModel a = train_gcn(emb, adj, labels, {0, 1, 2, 3}, 0, r1);
  GcnModel b(3, r2);
  REQUIRE(a.w1.value() == b.w1.value());
  REQUIRE(a.w2.value() == b.w2.value());
}

TEST_CASE("train_gcn is deterministic per seed", "[gcn]") {
  Graph g = make_graph(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}});
  NormalizedAdjacency adj = normalize_adjacency(g);
  Rng frng(3);
  Tensor emb = testutil::random_tensor(6, 4, frng, false);
  std::vector<std::int8_t> labels{1, 0, 1, 0, 1, 0};
  Rng r1(11), r2(11);
  GcnModel a = train_gcn(emb, adj, labels, {0, 1, 2, 3, 4, 5}, 50, r1);
  GcnModel b = train_gcn(emb, adj, labels, {0, 1, 2, 3, 4, 5}, 50, r2);
  REQUIRE(a.w1.value() == b.w1.value());
  REQUIRE(a.b1.value() == b.b1.value());
  REQUIRE(a.w2.value() == b.w2.value());
  REQUIRE(a.b2.value() == b.b2.value());
}

TEST_CASE("train_gcn rejects single-class and unlabeled training sets", "[gcn]") {
  Graph g = make_graph(4, {{0, 1}, {2, 3}});
  NormalizedAdjacency adj = normalize_adjacency(g);
  Tensor emb(4, 3, 0.1);
  Rng rng(1);
  std::vector<std::int8_t> one_class{1, 1, 1, 1};
  REQUIRE_THROWS_AS(train_gcn(emb, adj, one_class, {0, 1, 2, 3}, 10, rng),
                    std::invalid_argument);
  std::vector<std::int8_t> with_unlabeled{1, 0, kUnlabeled, 0};
  REQUIRE_THROWS_AS(train_gcn(emb, adj, with_unlabeled, {0, 1, 2, 3}, 10, rng),
                    std::invalid_argument);
}

TEST_CASE("prediction is deterministic given model and inputs", "[gcn]") {
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  NormalizedAdjacency adj = normalize_adjacency(g);
  Rng rng(6);
  GcnModel model(4, rng);
  Tensor emb = testutil::random_tensor(5, 4, rng, false);
  Prediction a = gcn_predict(model, emb, adj, {0, 1, 2, 3, 4});
  Prediction b = gcn_predict(model, emb, adj, {0, 1, 2, 3, 4});
  REQUIRE(a.scores == b.scores);
  REQUIRE(a.preds == b.preds);
}
