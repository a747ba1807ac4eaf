#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairac/adam.hpp"
#include "fairac/graph.hpp"
#include "fairac/model.hpp"
#include "fairac/rng.hpp"
#include "fairac/tensor.hpp"

namespace fairac {

struct CompletionDiagnostics {
  std::size_t completed = 0;
  std::size_t zero_filled = 0;  // nodes with no attribute-complete neighbor
};

inline Tensor detached(const Tensor& t) {
  Tensor out(t.rows(), t.cols());
  out.value() = t.value();
  return out;
}

// Drives the completion model over the AC-train slice of one graph.
//
// Per-epoch schedule: update the sensitive classifier on current embeddings,
// update the autoencoder against it, then resample the keep/drop division and
// update the completer on the dropped nodes. The classifier and autoencoder
// steps run on all feature-present AC-train nodes (the division does not
// exist yet at that point of the epoch); the completion and topological terms
// run on the fresh division, with aggregation restricted to kept nodes.
//
// Randomness per epoch is one dropout mask (autoencoder step) followed by one
// division draw, in both the full and the base_ac code paths, so the two
// trajectories are comparable bit for bit.
class FairACTrainer {
 public:
  FairACTrainer(const Graph& g, const DataSplit& split, const Tensor& topo, FairACConfig cfg,
                std::size_t min_ac_train = 1, std::size_t min_sens_train = 1)
      : graph_(g),
        cfg_(cfg),
        min_ac_train_(min_ac_train),
        min_sens_train_(min_sens_train),
        rng_(Rng::forked(cfg.seed, /*stream=*/3)) {
    cfg_.validate();
    if (topo.rows() != g.n_nodes)
      throw std::invalid_argument("FairACTrainer: topo embedding row count mismatch");
    if (!g.finalized()) throw std::invalid_argument("FairACTrainer: graph not finalized");
    topo_full_ = topo;
    ac_nodes_ = split.ac_train;
    std::sort(ac_nodes_.begin(), ac_nodes_.end());
    for (std::uint32_t u : ac_nodes_)
      if (g.feature_present[u]) v_plus_.push_back(u);

    row_in_ac_.assign(g.n_nodes, SIZE_MAX);
    for (std::size_t i = 0; i < ac_nodes_.size(); ++i) row_in_ac_[ac_nodes_[i]] = i;
    row_in_vplus_.assign(g.n_nodes, SIZE_MAX);
    for (std::size_t i = 0; i < v_plus_.size(); ++i) row_in_vplus_[v_plus_[i]] = i;

    const std::size_t d = g.feature_dim();
    x_plus_ = Tensor(v_plus_.size(), d);
    s_plus_ = Tensor(v_plus_.size(), 1);
    for (std::size_t i = 0; i < v_plus_.size(); ++i) {
      const std::uint32_t u = v_plus_[i];
      std::copy_n(g.features.value().data() + u * d, d, x_plus_.value().data() + i * d);
      s_plus_.value()[i] = static_cast<double>(g.sensitive[u]);
    }
    topo_ac_ = Tensor(ac_nodes_.size(), topo.cols());
    for (std::size_t i = 0; i < ac_nodes_.size(); ++i)
      std::copy_n(topo.value().data() + ac_nodes_[i] * topo.cols(), topo.cols(),
                  topo_ac_.value().data() + i * topo.cols());

    Rng init_rng = Rng::forked(cfg_.seed, /*stream=*/4);
    model_ = FairACModel(d, cfg_, init_rng);
    opt_ae_ = AdamState(model_.ae.parameters());
    opt_cs_ = AdamState(model_.cs.parameters());
    opt_ac_ = AdamState(model_.ac.parameters());
  }

  // Pretraining: L_ae + L_C with the sensitive classifier untouched. Each
  // iteration resamples the keep/drop division; L_ae covers the kept rows,
  // L_C the dropped ones.
  void pretrain() {
    if (ac_nodes_.size() < min_ac_train_)
      throw std::runtime_error("pretrain: AC-train slice has " + std::to_string(ac_nodes_.size()) +
                               " nodes, below the dataset minimum of " +
                               std::to_string(min_ac_train_));
    for (int it = 0; it < cfg_.pretrain_epochs; ++it) {
      DropPlan plan = sample_drop_plan(v_plus_, cfg_.alpha, rng_);
      Tape tape;
      bool any_completion = false;
      Tensor loss = build_pretrain_loss(tape, plan, cfg_.dropout, &rng_, &any_completion);
      backward(tape, loss);
      opt_ae_.step();
      if (any_completion) opt_ac_.step();
      ++epoch_;
    }
  }

  // One epoch of the full objective, honoring adversary_enabled / beta flags.
  void train_epoch() {
    check_sens_pool();
    // (1) sensitive classifier on current embeddings, encoder held fixed.
    if (cfg_.adversary_enabled) {
      Tape tape;
      Tensor h = encode_detached();
      Tensor l_cs = sensitive_bce(tape, model_.cs.logits(tape, h), s_plus_);
      backward(tape, l_cs);
      opt_cs_.step();
    }
    // (2) autoencoder against the frozen classifier: L_ae - beta * L_Cs.
    {
      Tape tape;
      Tensor l_f = build_feature_fairness_loss(tape, cfg_.dropout, &rng_);
      backward(tape, l_f);
      opt_ae_.step();
      opt_cs_.zero_grad();
    }
    // (3) fresh keep/drop division.
    DropPlan plan = sample_drop_plan(v_plus_, cfg_.alpha, rng_);
    // (4)+(5) complete the dropped nodes, update the completer.
    {
      Tape tape;
      bool any = false;
      Tensor loss = build_completer_loss(tape, plan, &any);
      if (any) {
        backward(tape, loss);
        opt_ac_.step();
        if (cfg_.unfreeze_encoder) opt_ae_.step();
        opt_cs_.zero_grad();
        opt_ae_.zero_grad();
      }
    }
    ++epoch_;
  }

  // The completion objective with the adversarial code removed entirely: the
  // base_ac arm. Must stay a separate path from train_epoch() so that the
  // flag-disabled run can be checked against it.
  void train_epoch_base() {
    check_sens_pool();
    {
      Tape tape;
      Tensor h = model_.ae.encode(tape, x_plus_, cfg_.dropout, &rng_);
      Tensor xhat = model_.ae.decode(tape, h);
      Tensor l_ae = reconstruction_loss(tape, xhat, x_plus_, cfg_.recon_norm);
      backward(tape, l_ae);
      opt_ae_.step();
    }
    DropPlan plan = sample_drop_plan(v_plus_, cfg_.alpha, rng_);
    {
      Tape tape;
      Tensor h_src = encode_detached();
      Tensor l_c;
      if (build_completion_term(tape, h_src, plan, /*with_topo_term=*/false, &l_c, &train_diag_)) {
        backward(tape, l_c);
        opt_ac_.step();
      }
    }
    ++epoch_;
  }

  // Embeddings for the whole graph: encoder output where attributes are
  // present, attention completion from attribute-complete neighbors where
  // they are missing. Unreachable nodes get zero rows and are counted in the
  // diagnostics.
  Tensor produce_embeddings(CompletionDiagnostics* diag = nullptr) const {
    Tape tape;  // evaluation only; never replayed
    const std::size_t d = graph_.feature_dim();
    std::vector<std::uint32_t> observed;
    for (std::uint32_t u = 0; u < graph_.n_nodes; ++u)
      if (graph_.feature_present[u]) observed.push_back(u);
    std::vector<std::size_t> row_of(graph_.n_nodes, SIZE_MAX);
    for (std::size_t i = 0; i < observed.size(); ++i) row_of[observed[i]] = i;

    Tensor x_obs(observed.size(), d);
    for (std::size_t i = 0; i < observed.size(); ++i)
      std::copy_n(graph_.features.value().data() + observed[i] * d, d,
                  x_obs.value().data() + i * d);
    Tensor h_obs = model_.ae.encode(tape, x_obs);
    Tensor transformed = model_.ac.transform(tape, topo_full_);

    const std::size_t e = model_.ae.hidden_dim();
    Tensor out(graph_.n_nodes, e);
    for (std::size_t i = 0; i < observed.size(); ++i)
      std::copy_n(h_obs.value().data() + i * e, e, out.value().data() + observed[i] * e);

    for (std::uint32_t u = 0; u < graph_.n_nodes; ++u) {
      if (graph_.feature_present[u]) continue;
      std::vector<std::size_t> nbr_rows_topo, nbr_rows_src;
      for (std::uint32_t v : graph_.neighbors(u)) {
        if (!graph_.feature_present[v]) continue;
        nbr_rows_topo.push_back(v);
        nbr_rows_src.push_back(row_of[v]);
      }
      if (nbr_rows_topo.empty()) {
        if (diag) ++diag->zero_filled;
        continue;
      }
      Tensor h_u = model_.ac.complete_node(tape, transformed, h_obs, u, nbr_rows_topo, nbr_rows_src);
      std::copy_n(h_u.value().data(), e, out.value().data() + u * e);
      if (diag) ++diag->completed;
    }
    return out;
  }

  double sensitive_train_accuracy() const {
    Tape tape;
    Tensor h = encode_detached();
    Tensor logits = model_.cs.logits(tape, h);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < v_plus_.size(); ++i) {
      const int pred = logits.value()[i] > 0.0 ? 1 : 0;
      if (pred == static_cast<int>(s_plus_.value()[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(v_plus_.size());
  }

  const FairACModel& model() const { return model_; }
  FairACModel& model() { return model_; }
  const FairACConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  const std::vector<std::uint32_t>& training_pool() const { return v_plus_; }
  const CompletionDiagnostics& train_diagnostics() const { return train_diag_; }

  // --- loss builders, also used by the gradient-check tests ---------------

  Tensor build_pretrain_loss(Tape& tape, const DropPlan& plan, double dropout_p, Rng* rng,
                             bool* any_completion = nullptr) {
    Tensor h = model_.ae.encode(tape, x_plus_, dropout_p, rng);
    Tensor xhat = model_.ae.decode(tape, h);
    const std::vector<std::size_t> keep_rows = vplus_rows(plan.keep);
    if (keep_rows.empty()) throw std::runtime_error("pretrain: empty keep set");
    Tensor l_ae = reconstruction_loss(tape, gather_rows(tape, xhat, keep_rows),
                                      gather_rows(tape, x_plus_, keep_rows), cfg_.recon_norm);
    Tensor l_c;
    const bool any = build_completion_term(tape, h, plan, /*with_topo_term=*/false, &l_c, nullptr);
    if (any_completion) *any_completion = any;
    return any ? add(tape, l_ae, l_c) : l_ae;
  }

  Tensor build_feature_fairness_loss(Tape& tape, double dropout_p, Rng* rng) {
    Tensor h = model_.ae.encode(tape, x_plus_, dropout_p, rng);
    Tensor xhat = model_.ae.decode(tape, h);
    Tensor l_ae = reconstruction_loss(tape, xhat, x_plus_, cfg_.recon_norm);
    if (!cfg_.adversary_enabled || cfg_.beta == 0.0) return l_ae;
    Tensor l_cs = sensitive_bce(tape, model_.cs.logits(tape, h), s_plus_);
    return sub(tape, l_ae, scale(tape, l_cs, cfg_.beta));
  }

  // L_C (+ beta * L_T when the adversary participates) over plan.drop, with
  // the encoder frozen unless configured otherwise. `any` reports whether any
  // dropped node had a kept neighbor.
  Tensor build_completer_loss(Tape& tape, const DropPlan& plan, bool* any = nullptr) {
    Tensor h_src =
        cfg_.unfreeze_encoder ? model_.ae.encode(tape, x_plus_) : encode_detached();
    Tensor loss;
    const bool ok = build_completion_term(tape, h_src, plan,
                                          cfg_.adversary_enabled && cfg_.beta != 0.0, &loss,
                                          &train_diag_);
    if (any) *any = ok;
    return loss;
  }

 private:
  void check_sens_pool() const {
    if (v_plus_.size() < min_sens_train_)
      throw std::runtime_error("train_epoch: " + std::to_string(v_plus_.size()) +
                               " sensitive-labeled training nodes, below the dataset minimum of " +
                               std::to_string(min_sens_train_));
  }

  // Eval-mode encoder output for the training pool, cut off from the tape.
  Tensor encode_detached() const {
    Tape scratch;
    return detached(model_.ae.encode(scratch, x_plus_));
  }

  std::vector<std::size_t> vplus_rows(const std::vector<std::uint32_t>& nodes) const {
    std::vector<std::size_t> rows;
    rows.reserve(nodes.size());
    for (std::uint32_t u : nodes) {
      const std::size_t r = row_in_vplus_[u];
      if (r == SIZE_MAX) throw std::logic_error("FairACTrainer: node outside the training pool");
      rows.push_back(r);
    }
    return rows;
  }

  // Completion term over plan.drop against sources restricted to plan.keep.
  // Rows of h_source are indexed like v_plus_. Returns false when every
  // dropped node lacks kept neighbors.
  bool build_completion_term(Tape& tape, const Tensor& h_source, const DropPlan& plan,
                             bool with_topo_term, Tensor* out, CompletionDiagnostics* diag) {
    std::vector<std::uint8_t> kept(graph_.n_nodes, 0);
    for (std::uint32_t u : plan.keep) kept[u] = 1;
    Tensor transformed = model_.ac.transform(tape, topo_ac_);  // rows follow ac_nodes_
    std::vector<Tensor> completed;
    std::vector<std::size_t> target_rows;
    std::vector<double> s_drop;
    for (std::uint32_t u : plan.drop) {
      std::vector<std::size_t> nbr_rows_topo, nbr_rows_src;
      for (std::uint32_t v : graph_.neighbors(u)) {
        if (!kept[v]) continue;
        nbr_rows_topo.push_back(row_in_ac_[v]);
        nbr_rows_src.push_back(row_in_vplus_[v]);
      }
      if (nbr_rows_topo.empty()) {
        if (diag) ++diag->zero_filled;
        continue;
      }
      completed.push_back(model_.ac.complete_node(tape, transformed, h_source, row_in_ac_[u],
                                                  nbr_rows_topo, nbr_rows_src));
      target_rows.push_back(row_in_vplus_[u]);
      s_drop.push_back(static_cast<double>(graph_.sensitive[u]));
      if (diag) ++diag->completed;
    }
    if (completed.empty()) return false;
    Tensor h_hat = concat_rows(tape, completed);
    Tensor h_true = gather_rows(tape, h_source, target_rows);
    Tensor l_c = reconstruction_loss(tape, h_hat, h_true, cfg_.recon_norm);
    if (with_topo_term) {
      Tensor s(s_drop.size(), 1);
      s.value() = s_drop;
      Tensor l_t = topo_loss(tape, model_.cs.logits(tape, h_hat), s, cfg_.topo_sign);
      *out = add(tape, l_c, scale(tape, l_t, cfg_.beta));
    } else {
      *out = l_c;
    }
    return true;
  }

  const Graph& graph_;
  Tensor topo_full_;  // n_nodes x topo_dim
  Tensor topo_ac_;    // |ac_nodes| x topo_dim slice used during training
  FairACConfig cfg_;
  std::size_t min_ac_train_;
  std::size_t min_sens_train_;
  Rng rng_;
  std::vector<std::uint32_t> ac_nodes_;
  std::vector<std::uint32_t> v_plus_;
  std::vector<std::size_t> row_in_ac_;
  std::vector<std::size_t> row_in_vplus_;
  Tensor x_plus_;  // |V_plus| x d attribute rows
  Tensor s_plus_;  // |V_plus| x 1 sensitive labels
  FairACModel model_;
  AdamState opt_ae_, opt_cs_, opt_ac_;
  CompletionDiagnostics train_diag_;
  int epoch_ = 0;
};

}  // namespace fairac
