#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairac/model.hpp"
#include "fairac/tensor.hpp"

namespace fairac {

using json = nlohmann::json;

inline json tensor_to_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Tensor tensor_from_json(const json& j, bool requires_grad = false) {
  const std::size_t r = j.size();
  const std::size_t c = r == 0 ? 0 : j.at(0).size();
  Tensor t(r, c, 0.0, requires_grad);
  for (std::size_t i = 0; i < r; ++i) {
    if (j.at(i).size() != c) throw std::runtime_error("tensor_from_json: ragged rows");
    for (std::size_t k = 0; k < c; ++k) t.at(i, k) = j.at(i).at(k).get<double>();
  }
  return t;
}

inline json config_to_json(const FairACConfig& c) {
  return json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"epochs", c.epochs},
              {"pretrain_epochs", c.pretrain_epochs},
              {"eval_start", c.eval_start},
              {"eval_every", c.eval_every},
              {"acc_threshold", c.acc_threshold},
              {"auc_threshold", c.auc_threshold},
              {"seed", c.seed},
              {"dropout", c.dropout},
              {"adversary_enabled", c.adversary_enabled},
              {"topo_sign", c.topo_sign == TopoSign::adversarial ? "adversarial" : "literal"},
              {"recon_norm", c.recon_norm == ReconNorm::euclidean ? "euclidean" : "l1"},
              {"unfreeze_encoder", c.unfreeze_encoder}};
}

inline FairACConfig config_from_json(const json& j) {
  FairACConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  c.eval_start = j.at("eval_start").get<int>();
  c.eval_every = j.at("eval_every").get<int>();
  c.acc_threshold = j.at("acc_threshold").get<double>();
  c.auc_threshold = j.at("auc_threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropout = j.at("dropout").get<double>();
  c.adversary_enabled = j.at("adversary_enabled").get<bool>();
  c.topo_sign =
      j.at("topo_sign").get<std::string>() == "literal" ? TopoSign::literal : TopoSign::adversarial;
  c.recon_norm =
      j.at("recon_norm").get<std::string>() == "l1" ? ReconNorm::l1 : ReconNorm::euclidean;
  c.unfreeze_encoder = j.at("unfreeze_encoder").get<bool>();
  return c;
}

// Versioned JSON checkpoint: every parameter matrix plus the configuration
// and seed that produced them.
inline void save_checkpoint(const std::string& path, const FairACModel& m) {
  json j;
  j["format"] = "fairac-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(m.cfg);
  j["autoencoder"] = {{"enc_w", tensor_to_json(m.ae.enc_w)},
                      {"enc_b", tensor_to_json(m.ae.enc_b)},
                      {"dec_w", tensor_to_json(m.ae.dec_w)},
                      {"dec_b", tensor_to_json(m.ae.dec_b)}};
  j["sensitive_classifier"] = {{"w", tensor_to_json(m.cs.w)}, {"b", tensor_to_json(m.cs.b)}};
  j["completer"] = {{"w", tensor_to_json(m.ac.w)},
                    {"b", tensor_to_json(m.ac.b)},
                    {"a", tensor_to_json(m.ac.a)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << j.dump(2) << "\n";
}

inline FairACModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "fairac-checkpoint" || j.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unrecognized format in " + path);
  FairACModel m;
  m.cfg = config_from_json(j.at("config"));
  const json& ae = j.at("autoencoder");
  m.ae.enc_w = tensor_from_json(ae.at("enc_w"), true);
  m.ae.enc_b = tensor_from_json(ae.at("enc_b"), true);
  m.ae.dec_w = tensor_from_json(ae.at("dec_w"), true);
  m.ae.dec_b = tensor_from_json(ae.at("dec_b"), true);
  const json& cs = j.at("sensitive_classifier");
  m.cs.w = tensor_from_json(cs.at("w"), true);
  m.cs.b = tensor_from_json(cs.at("b"), true);
  const json& ac = j.at("completer");
  m.ac.w = tensor_from_json(ac.at("w"), true);
  m.ac.b = tensor_from_json(ac.at("b"), true);
  m.ac.a = tensor_from_json(ac.at("a"), true);
  return m;
}

// Plain CSV export, one row per node.
inline void export_embeddings_csv(const std::string& path, const Tensor& emb) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export: cannot write " + path);
  out.precision(17);
  for (std::size_t r = 0; r < emb.rows(); ++r) {
    for (std::size_t c = 0; c < emb.cols(); ++c) {
      if (c) out << ',';
      out << emb.at(r, c);
    }
    out << '\n';
  }
}

}  // namespace fairac
