#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "fairac/adam.hpp"
#include "fairac/graph.hpp"
#include "fairac/model.hpp"
#include "fairac/rng.hpp"
#include "fairac/tensor.hpp"

namespace fairac {

// Symmetrically normalized adjacency with self-loops:
// A_hat = D^{-1/2} (A + I) D^{-1/2}. Self-loops guarantee positive degrees.
struct NormalizedAdjacency {
  CsrMatrix m;
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  if (g.n_nodes == 0) throw std::invalid_argument("normalize_adjacency: empty graph");
  std::vector<double> degree(g.n_nodes, 1.0);  // self-loop
  for (const auto& [u, v] : g.edges) {
    degree[u] += 1.0;
    degree[v] += 1.0;
  }
  std::vector<double> inv_sqrt(g.n_nodes);
  for (std::size_t i = 0; i < g.n_nodes; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  std::vector<std::tuple<std::size_t, std::size_t, double>> trip;
  trip.reserve(2 * g.edges.size() + g.n_nodes);
  for (std::size_t i = 0; i < g.n_nodes; ++i) trip.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
  for (const auto& [u, v] : g.edges) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    trip.emplace_back(u, v, w);
    trip.emplace_back(v, u, w);
  }
  NormalizedAdjacency adj;
  adj.m = CsrMatrix::from_triplets(g.n_nodes, g.n_nodes, std::move(trip));
  return adj;
}

// Two-layer GCN binary classifier: relu(A_hat x W1 + b1) with dropout during
// training, then A_hat (.) W2 + b2 producing one logit per node.
struct GcnModel {
  Tensor w1, b1, w2, b2;
  double dropout = 0.5;

  GcnModel() = default;
  GcnModel(std::size_t in_dim, Rng& rng, std::size_t hidden = kEmbeddingDim)
      : w1(in_dim, hidden, 0.0, true),
        b1(1, hidden, 0.0, true),
        w2(hidden, 1, 0.0, true),
        b2(1, 1, 0.0, true) {
    glorot_init(w1, rng);
    glorot_init(w2, rng);
  }

  Tensor logits(Tape& tape, const Tensor& x, const NormalizedAdjacency& adj, bool training,
                Rng* rng) const {
    Tensor h = relu(tape, add_rowvec(tape, matmul(tape, spmm(tape, adj.m, x), w1), b1));
    if (training && dropout > 0.0) {
      if (rng == nullptr) throw std::invalid_argument("GcnModel::logits: dropout needs an rng");
      h = fairac::dropout(tape, h, dropout, *rng, true);
    }
    return add_rowvec(tape, matmul(tape, spmm(tape, adj.m, h), w2), b2);
  }

  std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

// BCE training on the given node set; zero epochs returns the seeded init.
// train_nodes must carry 0/1 labels of both classes.
inline GcnModel train_gcn(const Tensor& emb, const NormalizedAdjacency& adj,
                          const std::vector<std::int8_t>& labels,
                          const std::vector<std::uint32_t>& train_nodes, int epochs, Rng& rng,
                          AdamConfig opt_cfg = {}, std::vector<double>* loss_history = nullptr) {
  if (train_nodes.empty()) throw std::invalid_argument("train_gcn: empty training set");
  std::size_t positives = 0;
  std::vector<std::size_t> rows;
  rows.reserve(train_nodes.size());
  Tensor targets(train_nodes.size(), 1);
  for (std::size_t i = 0; i < train_nodes.size(); ++i) {
    const std::uint32_t u = train_nodes[i];
    if (labels[u] != 0 && labels[u] != 1)
      throw std::invalid_argument("train_gcn: node " + std::to_string(u) + " is unlabeled");
    positives += labels[u] == 1 ? 1u : 0u;
    rows.push_back(u);
    targets.value()[i] = static_cast<double>(labels[u]);
  }
  if (positives == 0 || positives == train_nodes.size())
    throw std::invalid_argument("train_gcn: training labels are all one class");

  GcnModel model(emb.cols(), rng);
  AdamState opt(model.parameters(), opt_cfg);
  for (int e = 0; e < epochs; ++e) {
    Tape tape;
    Tensor logits = model.logits(tape, emb, adj, /*training=*/true, &rng);
    Tensor loss = bce_with_logits(tape, gather_rows(tape, logits, rows), targets);
    if (loss_history) loss_history->push_back(loss.item());
    backward(tape, loss);
    opt.step();
  }
  return model;
}

struct Prediction {
  std::vector<double> scores;      // sigmoid probabilities, one per requested node
  std::vector<std::int8_t> preds;  // score > 0.5; an exact 0.5 tie goes to class 0
};

inline Prediction gcn_predict(const GcnModel& model, const Tensor& emb,
                              const NormalizedAdjacency& adj,
                              const std::vector<std::uint32_t>& nodes) {
  Tape tape;  // evaluation only
  Tensor logits = model.logits(tape, emb, adj, /*training=*/false, nullptr);
  Prediction p;
  p.scores.reserve(nodes.size());
  p.preds.reserve(nodes.size());
  for (std::uint32_t u : nodes) {
    const double s = detail::stable_sigmoid(logits.value()[u]);
    p.scores.push_back(s);
    p.preds.push_back(s > 0.5 ? 1 : 0);
  }
  return p;
}

}  // namespace fairac
