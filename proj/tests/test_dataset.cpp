#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "test_helpers.hpp"

using namespace fairac;
using testutil::write_temp_file;

namespace {

DatasetSpec toy_spec() {
  const std::string nodes = write_temp_file("toy_nodes.csv",
                                            "user_id,f1,f2,region,label\n"
                                            "10,1.0,4.0,0,1\n"
                                            "20,2.0,6.0,1,0\n"
                                            "30,3.0,8.0,0,-1\n");
  const std::string edges = write_temp_file("toy_edges.txt", "10 20\n20 30\n20 10\n");
  DatasetSpec spec;
  spec.name = "toy";
  spec.node_path = nodes;
  spec.edge_path = edges;
  spec.sensitive_col = "region";
  spec.label_col = "label";
  return spec;
}

}  // namespace

TEST_CASE("toy CSV fixture loads to the exact expected graph", "[dataset]") {
  Graph g = load_dataset(toy_spec());
  REQUIRE(g.n_nodes == 3);
  REQUIRE(g.feature_dim() == 2);  // sensitive and label removed
  // duplicate directed edge collapses
  REQUIRE(g.edges == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {1, 2}});
  // column min-max over observed nodes: f1 in {1,2,3} -> {0, .5, 1}
  REQUIRE(g.features.at(0, 0) == 0.0);
  REQUIRE(g.features.at(1, 0) == 0.5);
  REQUIRE(g.features.at(2, 0) == 1.0);
  REQUIRE(g.features.at(0, 1) == 0.0);
  REQUIRE(g.features.at(2, 1) == 1.0);
  REQUIRE(g.sensitive == std::vector<std::int8_t>{0, 1, 0});
  REQUIRE(g.labels == std::vector<std::int8_t>{1, 0, kUnlabeled});
  REQUIRE(g.feature_present == std::vector<std::uint8_t>{1, 1, 1});
}

TEST_CASE("unknown edge endpoint names the offending id", "[dataset]") {
  DatasetSpec spec = toy_spec();
  spec.edge_path = write_temp_file("toy_bad_edges.txt", "10 99\n");
  REQUIRE_THROWS_WITH(load_dataset(spec), Catch::Matchers::ContainsSubstring("99"));
}

TEST_CASE("reloading the same files yields identical graphs", "[dataset]") {
  DatasetSpec spec = toy_spec();
  Graph a = load_dataset(spec);
  Graph b = load_dataset(spec);
  REQUIRE(a.features.value() == b.features.value());
  REQUIRE(a.edges == b.edges);
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.sensitive == b.sensitive);
}

TEST_CASE("binarize_sensitive thresholds age below 21", "[dataset]") {
  REQUIRE(binarize_sensitive({18.0, 21.0, 35.0}, "age") == std::vector<std::int8_t>{1, 0, 0});
}

TEST_CASE("binarize_sensitive passes binary columns through", "[dataset]") {
  REQUIRE(binarize_sensitive({0.0, 1.0, 1.0, 0.0}, "region") ==
          std::vector<std::int8_t>{0, 1, 1, 0});
  // two distinct non-binary values map min->0 max->1
  REQUIRE(binarize_sensitive({5.0, 9.0, 5.0}, "country") == std::vector<std::int8_t>{0, 1, 0});
}

TEST_CASE("binarize_sensitive rejects degenerate columns", "[dataset]") {
  REQUIRE_THROWS_AS(binarize_sensitive({3.0, 3.0, 3.0}, "region"), std::runtime_error);
  REQUIRE_THROWS_AS(binarize_sensitive({1.0, 2.0, 3.0}, "region"), std::runtime_error);
  REQUIRE_THROWS_AS(binarize_sensitive({25.0, 25.0}, "age"), std::runtime_error);
}

TEST_CASE("apply_missing masks the rounded fraction and zeroes rows", "[dataset]") {
  Graph g = load_dataset(toy_spec());
  SECTION("alpha=0 leaves the graph unchanged") {
    Graph h = load_dataset(toy_spec());
    Rng rng(1);
    apply_missing(h, 0.0, rng);
    REQUIRE(h.features.value() == g.features.value());
    REQUIRE(h.feature_present == g.feature_present);
  }
  SECTION("alpha=1 is rejected") {
    Rng rng(1);
    REQUIRE_THROWS_AS(apply_missing(g, 1.0, rng), std::invalid_argument);
  }
  SECTION("rounding rule: alpha=0.3 over 403 nodes masks 121") {
    Graph big;
    big.n_nodes = 403;
    big.features = Tensor(403, 2, 1.0);
    for (std::size_t i = 0; i < 403; ++i) big.features.at(i, 0) = static_cast<double>(i);
    big.feature_present.assign(403, 1);
    big.sensitive.assign(403, 0);
    big.sensitive[0] = 1;
    big.labels.assign(403, 0);
    big.finalize();
    Rng rng(7);
    apply_missing(big, 0.3, rng);
    std::size_t masked = 0;
    for (std::size_t i = 0; i < 403; ++i) {
      if (!big.feature_present[i]) {
        ++masked;
        REQUIRE(big.features.at(i, 0) == 0.0);
        REQUIRE(big.features.at(i, 1) == 0.0);
      }
    }
    REQUIRE(masked == 121);
  }
  SECTION("same seed gives the same mask") {
    Graph a = load_dataset(toy_spec());
    Graph b = load_dataset(toy_spec());
    Rng r1(9), r2(9);
    apply_missing(a, 0.4, r1);
    apply_missing(b, 0.4, r2);
    REQUIRE(a.feature_present == b.feature_present);
    REQUIRE(a.features.value() == b.features.value());
  }
}

TEST_CASE("masked nodes are excluded from normalization statistics", "[dataset]") {
  // After masking, surviving columns re-normalize over the observed set only.
  const std::string nodes = write_temp_file("norm_nodes.csv",
                                            "id,f1,s,y\n"
                                            "1,10.0,0,1\n"
                                            "2,20.0,1,0\n"
                                            "3,30.0,0,1\n"
                                            "4,40.0,1,0\n");
  const std::string edges = write_temp_file("norm_edges.txt", "1 2\n3 4\n");
  DatasetSpec spec;
  spec.name = "norm";
  spec.node_path = nodes;
  spec.edge_path = edges;
  spec.sensitive_col = "s";
  spec.label_col = "y";
  Graph g = load_dataset(spec);
  // Find a seed that masks node 3 (raw value 40), shrinking the observed max.
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    Graph h = load_dataset(spec);
    Rng rng(seed);
    apply_missing(h, 0.25, rng);
    if (!h.feature_present[3]) {
      // observed raw values {10,20,30} -> normalized {0, 0.5, 1}
      REQUIRE(h.features.at(0, 0) == 0.0);
      REQUIRE(h.features.at(1, 0) == 0.5);
      REQUIRE(h.features.at(2, 0) == 1.0);
      REQUIRE(h.features.at(3, 0) == 0.0);  // placeholder row
      return;
    }
  }
  FAIL("no seed masked node 3");
}

TEST_CASE("constant observed columns normalize to zero", "[dataset]") {
  const std::string nodes = write_temp_file("const_nodes.csv",
                                            "id,f1,f2,s,y\n"
                                            "1,7.0,1.0,0,1\n"
                                            "2,7.0,2.0,1,0\n");
  const std::string edges = write_temp_file("const_edges.txt", "1 2\n");
  DatasetSpec spec;
  spec.name = "const";
  spec.node_path = nodes;
  spec.edge_path = edges;
  spec.sensitive_col = "s";
  spec.label_col = "y";
  Graph g = load_dataset(spec);
  REQUIRE(g.features.at(0, 0) == 0.0);
  REQUIRE(g.features.at(1, 0) == 0.0);
  REQUIRE(g.features.at(1, 1) == 1.0);
}

TEST_CASE("malformed node files are rejected", "[dataset]") {
  DatasetSpec spec = toy_spec();
  spec.node_path = write_temp_file("ragged.csv", "id,f1,s,y\n1,2.0,0\n");
  REQUIRE_THROWS_AS(load_dataset(spec), std::runtime_error);
  spec.node_path = write_temp_file("dup_id.csv", "id,f1,s,y\n1,2.0,0,1\n1,3.0,1,0\n");
  REQUIRE_THROWS_AS(load_dataset(spec), std::runtime_error);
  spec.node_path = write_temp_file("not_num.csv", "id,f1,s,y\n1,abc,0,1\n");
  REQUIRE_THROWS_AS(load_dataset(spec), std::runtime_error);
}

TEST_CASE("synthetic nba fixture matches the published shape when present", "[dataset]") {
  const std::string root = testutil::repo_path("data/synthetic");
  DatasetSpec spec;
  spec.name = "nba";
  spec.node_path = root + "/nba/nba.csv";
  spec.edge_path = root + "/nba/nba_relationship.txt";
  spec.sensitive_col = "country";
  spec.label_col = "SALARY";
  if (!std::filesystem::exists(spec.node_path)) {
    SKIP("synthetic nba fixture not generated yet");
  }
  Graph g = load_dataset(spec);
  REQUIRE(g.n_nodes == 403);
  REQUIRE(g.edges.size() == 16570 / 2);
}
