#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace fairac;

TEST_CASE("accuracy on hand cases", "[metrics]") {
  REQUIRE(accuracy({1, 0, 1}, {1, 0, 1}) == 1.0);
  REQUIRE(accuracy({0, 1, 0}, {1, 0, 1}) == 0.0);
  REQUIRE(accuracy({1, 1, 0, 0}, {1, 1, 0, 1}) == 0.75);
}

TEST_CASE("auc on hand cases", "[metrics]") {
  REQUIRE(auc_score({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  REQUIRE(auc_score({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  // ties contribute one half per pair
  REQUIRE(auc_score({0.9, 0.8, 0.8, 0.1}, {1, 1, 0, 0}) == 0.875);
  REQUIRE_THROWS_AS(auc_score({0.5, 0.6}, {1, 1}), std::invalid_argument);
}

TEST_CASE("auc is invariant to strictly monotone transforms of scores", "[metrics]") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores;
    std::vector<std::int8_t> labels;
    for (int i = 0; i < 15; ++i) {
      scores.push_back(rng.uniform());
      labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    labels[0] = 1;
    labels[1] = 0;
    std::vector<double> squashed;
    for (double s : scores) squashed.push_back(1.0 / (1.0 + std::exp(-(5.0 * s - 1.0))));
    REQUIRE(auc_score(scores, labels) == Catch::Approx(auc_score(squashed, labels)).margin(1e-12));
  }
}

TEST_CASE("statistical parity on hand cases", "[metrics]") {
  REQUIRE(statistical_parity({1, 0, 1, 0}, {0, 0, 1, 1}) == 0.0);
  REQUIRE(statistical_parity({1, 1, 0, 0}, {0, 0, 1, 1}) == 1.0);
  REQUIRE(statistical_parity({1, 0, 1, 1}, {0, 0, 1, 1}) == 0.5);
  REQUIRE_THROWS_AS(statistical_parity({1, 0}, {0, 0}), std::invalid_argument);
}

TEST_CASE("equal opportunity on hand cases", "[metrics]") {
  REQUIRE(equal_opportunity({1, 1, 1, 1}, {0, 0, 1, 1}, {1, 1, 1, 1}) == 0.0);
  REQUIRE(equal_opportunity({1, 0, 1, 0}, {0, 0, 1, 1}, {1, 1, 1, 1}) == 0.0);
  REQUIRE(equal_opportunity({1, 1, 1, 0}, {0, 0, 1, 1}, {1, 1, 1, 1}) == 0.5);
  // group 1 has no positive labels
  REQUIRE_THROWS_AS(equal_opportunity({1, 0}, {0, 1}, {1, 0}), std::invalid_argument);
}

TEST_CASE("fairness metrics are invariant to relabeling the groups", "[metrics]") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int8_t> preds, sens, labels;
    for (int i = 0; i < 12; ++i) {
      preds.push_back(rng.bernoulli(0.5) ? 1 : 0);
      sens.push_back(rng.bernoulli(0.5) ? 1 : 0);
      labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    sens[0] = 0; sens[1] = 1;          // both groups present
    labels[0] = 1; labels[1] = 1;      // positives in both groups
    std::vector<std::int8_t> flipped;
    for (std::int8_t s : sens) flipped.push_back(s == 0 ? 1 : 0);
    REQUIRE(statistical_parity(preds, sens) ==
            Catch::Approx(statistical_parity(preds, flipped)).margin(1e-15));
    REQUIRE(equal_opportunity(preds, sens, labels) ==
            Catch::Approx(equal_opportunity(preds, flipped, labels)).margin(1e-15));
    REQUIRE(statistical_parity(preds, sens) >= 0.0);
    REQUIRE(statistical_parity(preds, sens) <= 1.0);
  }
}

TEST_CASE("build_similarity basic structure", "[metrics]") {
  SECTION("identical rows have similarity one") {
    Tensor f = Tensor::from_rows({{1.0, 2.0}, {1.0, 2.0}, {2.0, 4.0}});
    SimilarityGraph sg = build_similarity(f, 10);
    REQUIRE(sg.s.at(0, 1) == Catch::Approx(1.0));
    REQUIRE(sg.s.at(0, 2) == Catch::Approx(1.0));  // same direction
  }
  SECTION("orthogonal rows have similarity zero") {
    Tensor f = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    SimilarityGraph sg = build_similarity(f, 10);
    REQUIRE(sg.s.at(0, 1) == 0.0);
    REQUIRE(sg.s.nnz() == 0);
  }
  SECTION("negative cosine clamps to zero") {
    Tensor f = Tensor::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
    SimilarityGraph sg = build_similarity(f, 10);
    REQUIRE(sg.s.at(0, 1) == 0.0);
  }
  SECTION("zero rows have similarity zero by convention") {
    Tensor f = Tensor::from_rows({{0.0, 0.0}, {1.0, 1.0}});
    SimilarityGraph sg = build_similarity(f, 10);
    REQUIRE(sg.s.nnz() == 0);
  }
  SECTION("diagonal is always zero and matrix is symmetric with <=2k per row") {
    Rng rng(19);
    Tensor f = testutil::random_tensor(12, 4, rng, false, 0.0, 1.0);
    const std::size_t k = 3;
    SimilarityGraph sg = build_similarity(f, k);
    for (std::size_t i = 0; i < 12; ++i) {
      REQUIRE(sg.s.at(i, i) == 0.0);
      REQUIRE(sg.s.row_ptr[i + 1] - sg.s.row_ptr[i] <= 2 * k);
      for (std::size_t kk = sg.s.row_ptr[i]; kk < sg.s.row_ptr[i + 1]; ++kk) {
        REQUIRE(sg.s.val[kk] >= 0.0);
        REQUIRE(sg.s.at(sg.s.col_idx[kk], i) == sg.s.val[kk]);
      }
    }
  }
}

TEST_CASE("consistency on hand cases", "[metrics]") {
  SECTION("perfect uniform predictions give 1") {
    Tensor f = Tensor::from_rows({{1.0, 0.0}, {1.0, 0.1}, {1.0, 0.2}});
    SimilarityGraph sg = build_similarity(f, 2);
    REQUIRE(consistency({1, 1, 1}, {1, 1, 1}, sg) == 1.0);
  }
  SECTION("two nodes with swapped predictions, brute-force value") {
    SimilarityGraph sg;
    sg.k = 1;
    sg.s = CsrMatrix::from_triplets(2, 2, {{0, 1, 0.5}, {1, 0, 0.5}});
    // paper mode crosses indices: |y_0 - p_1| = |1-1| = 0 and |y_1 - p_0| = 0,
    // so the double sum vanishes.
    REQUIRE(consistency({0, 1}, {1, 0}, sg, ConsistencyMode::paper) == 1.0);
    const auto dense = testutil::dense_similarity(sg);
    REQUIRE(consistency({0, 1}, {1, 0}, sg, ConsistencyMode::paper) ==
            testutil::oracle_consistency({0, 1}, {1, 0}, dense, true));
    // prediction-pair mode compares the disagreeing predictions directly.
    REQUIRE(consistency({0, 1}, {1, 0}, sg, ConsistencyMode::prediction_pair) == 0.0);
  }
  SECTION("scaling the similarity matrix leaves the value unchanged") {
    Rng rng(4);
    Tensor f = testutil::random_tensor(8, 3, rng, false, 0.0, 1.0);
    SimilarityGraph sg = build_similarity(f, 3);
    std::vector<std::int8_t> preds, labels;
    for (int i = 0; i < 8; ++i) {
      preds.push_back(rng.bernoulli(0.5) ? 1 : 0);
      labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    const double before = consistency(preds, labels, sg);
    SimilarityGraph scaled = sg;
    for (double& v : scaled.s.val) v *= 7.25;  // exact scaling in binary
    REQUIRE(consistency(preds, labels, scaled) == Catch::Approx(before).margin(1e-12));
  }
  SECTION("all-zero similarity is an error") {
    SimilarityGraph sg;
    sg.s = CsrMatrix::from_triplets(2, 2, {});
    REQUIRE_THROWS_AS(consistency({0, 1}, {0, 1}, sg), std::invalid_argument);
  }
}

TEST_CASE("metrics match brute-force enumeration on 100 random instances", "[metrics][oracle]") {
  Rng rng(123);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t n = 4 + rng.uniform_index(17);  // up to 20 nodes
    std::vector<std::int8_t> preds, labels, sens;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(rng.bernoulli(0.5) ? 1 : 0);
      labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
      sens.push_back(rng.bernoulli(0.5) ? 1 : 0);
      // coarse grid makes score ties common
      scores.push_back(static_cast<double>(rng.uniform_index(5)) / 4.0);
    }
    // force both label classes, both groups, positives in both groups
    labels[0] = 1; labels[1] = 0;
    sens[0] = 0; sens[1] = 1;
    labels[2 % n] = 1;
    sens[2 % n] = 1;
    labels[3 % n] = 1;
    sens[3 % n] = 0;

    REQUIRE(accuracy(preds, labels) == testutil::oracle_accuracy(preds, labels));
    REQUIRE(auc_score(scores, labels) == testutil::oracle_auc(scores, labels));
    REQUIRE(statistical_parity(preds, sens) == testutil::oracle_statistical_parity(preds, sens));
    REQUIRE(equal_opportunity(preds, sens, labels) ==
            testutil::oracle_equal_opportunity(preds, sens, labels));

    Tensor feats = testutil::random_tensor(n, 3, rng, false, 0.0, 1.0);
    SimilarityGraph sg = build_similarity(feats, 4);
    if (sg.s.nnz() > 0) {
      const auto dense = testutil::dense_similarity(sg);
      REQUIRE(consistency(preds, labels, sg, ConsistencyMode::paper) ==
              testutil::oracle_consistency(preds, labels, dense, true));
      REQUIRE(consistency(preds, labels, sg, ConsistencyMode::prediction_pair) ==
              testutil::oracle_consistency(preds, labels, dense, false));
    }
  }
}

TEST_CASE("eval report wires dsp_plus_deo exactly", "[metrics]") {
  Rng rng(77);
  Tensor feats = testutil::random_tensor(10, 3, rng, false, 0.0, 1.0);
  SimilarityGraph sg = build_similarity(feats, 3);
  std::vector<std::int8_t> preds{1, 0, 1, 0, 1, 1, 0, 0, 1, 0};
  std::vector<std::int8_t> labels{1, 0, 1, 1, 0, 1, 0, 0, 1, 1};
  std::vector<std::int8_t> sens{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  std::vector<double> scores;
  for (std::int8_t p : preds) scores.push_back(p ? 0.9 : 0.1);
  EvalReport r = make_eval_report(preds, scores, labels, sens, sg);
  REQUIRE(r.dsp_plus_deo == r.dsp + r.deo);
  REQUIRE(r.consistency == Catch::Approx(100.0 * consistency(preds, labels, sg)));
}
