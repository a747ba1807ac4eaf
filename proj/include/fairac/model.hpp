#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairac/adam.hpp"
#include "fairac/rng.hpp"
#include "fairac/tensor.hpp"

namespace fairac {

inline void glorot_init(Tensor& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.value()) v = rng.uniform(-limit, limit);
}

// How the reconstruction/completion distance aggregates a difference matrix:
// per-node Euclidean norm (default reading of the loss definitions) or
// per-node L1.
enum class ReconNorm { euclidean, l1 };

// Orientation of the topological-fairness term. `adversarial` negates the
// classifier BCE so minimizing drives predictions away from the sensitive
// labels; `literal` keeps the plain BCE.
enum class TopoSign { adversarial, literal };

struct FairACConfig {
  double alpha = 0.3;
  double beta = 1.0;
  int epochs = 3000;           // total, including pretraining
  int pretrain_epochs = 200;
  int eval_start = 1000;
  int eval_every = 200;
  double acc_threshold = 0.65;
  double auc_threshold = 0.69;
  std::uint64_t seed = 40;
  double dropout = 0.5;
  bool adversary_enabled = true;
  TopoSign topo_sign = TopoSign::adversarial;
  ReconNorm recon_norm = ReconNorm::euclidean;
  bool unfreeze_encoder = false;  // let the completion step update the encoder

  void validate() const {
    if (pretrain_epochs >= epochs)
      throw std::invalid_argument("FairACConfig: pretrain_epochs must be < epochs");
    if (eval_start > epochs)
      throw std::invalid_argument("FairACConfig: eval_start must be <= epochs");
    if (acc_threshold < 0.0 || acc_threshold > 1.0 || auc_threshold < 0.0 || auc_threshold > 1.0)
      throw std::invalid_argument("FairACConfig: thresholds must be in [0, 1]");
    if (alpha < 0.0 || alpha >= 1.0)
      throw std::invalid_argument("FairACConfig: alpha must be in [0, 1)");
    if (eval_every <= 0) throw std::invalid_argument("FairACConfig: eval_every must be positive");
  }
};

inline constexpr std::size_t kEmbeddingDim = 128;
inline constexpr std::size_t kTopoDim = 64;

// One affine + relu encoder to a 128-wide embedding, linear decoder back to
// attribute space. Dropout regularizes the hidden layer during training only.
struct AutoEncoder {
  Tensor enc_w, enc_b, dec_w, dec_b;

  AutoEncoder() = default;
  AutoEncoder(std::size_t in_dim, Rng& rng, std::size_t hidden = kEmbeddingDim)
      : enc_w(in_dim, hidden, 0.0, true),
        enc_b(1, hidden, 0.0, true),
        dec_w(hidden, in_dim, 0.0, true),
        dec_b(1, in_dim, 0.0, true) {
    glorot_init(enc_w, rng);
    glorot_init(dec_w, rng);
  }

  std::size_t in_dim() const { return enc_w.rows(); }
  std::size_t hidden_dim() const { return enc_w.cols(); }

  Tensor encode(Tape& tape, const Tensor& x, double dropout_p = 0.0, Rng* rng = nullptr) const {
    if (x.cols() != in_dim())
      throw std::invalid_argument("AutoEncoder::encode: input width " + std::to_string(x.cols()) +
                                  " does not match encoder width " + std::to_string(in_dim()));
    Tensor h = relu(tape, add_rowvec(tape, matmul(tape, x, enc_w), enc_b));
    if (dropout_p > 0.0) {
      if (rng == nullptr) throw std::invalid_argument("AutoEncoder::encode: dropout needs an rng");
      h = dropout(tape, h, dropout_p, *rng, true);
    }
    return h;
  }

  Tensor decode(Tape& tape, const Tensor& h) const {
    return add_rowvec(tape, matmul(tape, h, dec_w), dec_b);
  }

  std::vector<Tensor> parameters() const { return {enc_w, enc_b, dec_w, dec_b}; }
};

// Single affine layer on feature embeddings; one logit per node.
struct SensitiveClassifier {
  Tensor w, b;

  SensitiveClassifier() = default;
  SensitiveClassifier(std::size_t in_dim, Rng& rng) : w(in_dim, 1, 0.0, true), b(1, 1, 0.0, true) {
    glorot_init(w, rng);
  }

  Tensor logits(Tape& tape, const Tensor& h) const {
    return add_rowvec(tape, matmul(tape, h, w), b);
  }

  std::vector<Tensor> parameters() const { return {w, b}; }
};

// Single-head attention over a node's kept neighbors. Scores come from a
// shared affine transform of the topological embeddings of both endpoints;
// the completed embedding is the softmax-weighted sum of neighbor feature
// embeddings.
struct AttentionCompleter {
  Tensor w, b;  // topo transform, kTopoDim -> kTopoDim
  Tensor a;     // score vector over the concatenated pair, 2*kTopoDim -> 1
  double leaky_slope = 0.2;

  AttentionCompleter() = default;
  AttentionCompleter(Rng& rng, std::size_t topo_dim = kTopoDim)
      : w(topo_dim, topo_dim, 0.0, true),
        b(1, topo_dim, 0.0, true),
        a(2 * topo_dim, 1, 0.0, true) {
    glorot_init(w, rng);
    glorot_init(a, rng);
  }

  std::size_t topo_dim() const { return w.rows(); }

  // Transformed topological embeddings for all nodes, computed once per pass.
  Tensor transform(Tape& tape, const Tensor& topo) const {
    if (topo.cols() != topo_dim())
      throw std::invalid_argument("AttentionCompleter: topo width mismatch");
    return add_rowvec(tape, matmul(tape, topo, w), b);
  }

  // Softmax attention weights of `node` over `neighbor_rows` of the
  // transformed topo matrix; returned as a 1 x k row.
  Tensor attention_weights(Tape& tape, const Tensor& transformed, std::size_t node,
                           const std::vector<std::size_t>& neighbor_rows) const {
    if (neighbor_rows.empty())
      throw std::invalid_argument("AttentionCompleter: node has no kept neighbor");
    Tensor self = gather_rows(tape, transformed, std::vector<std::size_t>(neighbor_rows.size(), node));
    Tensor nbrs = gather_rows(tape, transformed, neighbor_rows);
    Tensor pair = concat_cols(tape, self, nbrs);                    // k x 2t
    Tensor scores = leaky_relu(tape, matmul(tape, pair, a), leaky_slope);  // k x 1
    return row_softmax(tape, transpose(tape, scores));              // 1 x k
  }

  // Completed embedding of `node`: weighted aggregation of the given source
  // embeddings (rows of `sources` listed by `source_rows`).
  Tensor complete_node(Tape& tape, const Tensor& transformed, const Tensor& sources,
                       std::size_t node, const std::vector<std::size_t>& neighbor_rows,
                       const std::vector<std::size_t>& source_rows) const {
    Tensor weights = attention_weights(tape, transformed, node, neighbor_rows);
    Tensor h_nbrs = gather_rows(tape, sources, source_rows);  // k x dim
    return matmul(tape, weights, h_nbrs);                     // 1 x dim
  }

  std::vector<Tensor> parameters() const { return {w, b, a}; }
};

struct FairACModel {
  AutoEncoder ae;
  SensitiveClassifier cs;
  AttentionCompleter ac;
  FairACConfig cfg;

  FairACModel() = default;
  FairACModel(std::size_t feature_dim, FairACConfig config, Rng& rng)
      : ae(feature_dim, rng), cs(kEmbeddingDim, rng), ac(rng), cfg(config) {
    cfg.validate();
  }
};

// --- loss terms -------------------------------------------------------------

// Mean over nodes of the per-node distance between matched rows. Euclidean
// reads the loss definitions' sqrt((.)^2) as a vector norm; l1 is the
// per-element absolute-difference alternative kept behind the config switch.
inline Tensor reconstruction_loss(Tape& tape, const Tensor& reconstructed, const Tensor& original,
                                  ReconNorm norm = ReconNorm::euclidean) {
  detail::check_same_shape(reconstructed, original, "reconstruction_loss");
  if (reconstructed.rows() == 0)
    throw std::invalid_argument("reconstruction_loss: empty node set");
  Tensor diff = sub(tape, reconstructed, original);
  if (norm == ReconNorm::euclidean) return mean_all(tape, row_l2_norm(tape, diff));
  Tensor abs = add(tape, relu(tape, diff), relu(tape, scale(tape, diff, -1.0)));
  return scale(tape, sum_all(tape, abs), 1.0 / static_cast<double>(diff.rows()));
}

// Plain BCE of sensitive logits against the group labels.
inline Tensor sensitive_bce(Tape& tape, const Tensor& logits, const Tensor& sensitive) {
  if (logits.rows() == 0) throw std::invalid_argument("sensitive_bce: empty node set");
  return bce_with_logits(tape, logits, sensitive);
}

// Topological-fairness term over completed embeddings of dropped nodes.
inline Tensor topo_loss(Tape& tape, const Tensor& logits, const Tensor& sensitive,
                        TopoSign sign = TopoSign::adversarial) {
  if (logits.rows() == 0) throw std::invalid_argument("topo_loss: empty node set");
  Tensor bce = bce_with_logits(tape, logits, sensitive);
  return sign == TopoSign::adversarial ? scale(tape, bce, -1.0) : bce;
}

// Total objective: (L_ae - beta * L_Cs) + L_C + beta * L_T.
inline Tensor total_loss(Tape& tape, const Tensor& l_ae, const Tensor& l_cs, const Tensor& l_c,
                         const Tensor& l_t, double beta) {
  Tensor feature_fairness = sub(tape, l_ae, scale(tape, l_cs, beta));
  return add(tape, add(tape, feature_fairness, l_c), scale(tape, l_t, beta));
}

inline double total_loss_value(double l_ae, double l_cs, double l_c, double l_t, double beta) {
  return (l_ae - beta * l_cs) + l_c + beta * l_t;
}

}  // namespace fairac
