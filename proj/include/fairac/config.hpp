#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairac/experiment.hpp"

namespace fairac {

// Plain-text key/value configuration: one `key = value` (or `key value`) per
// line, '#' starts a comment. Keys are listed in the README; unknown keys are
// an error so typos do not silently fall back to defaults.

inline constexpr const char* kDataRootEnvVar = "FAIRAC_DATA_ROOT";

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  auto as_double = [&] { return detail::parse_number(value, "config key " + key); };
  auto as_int = [&] { return static_cast<int>(as_double()); };
  auto as_size = [&] { return static_cast<std::size_t>(as_double()); };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::runtime_error("config: boolean expected for " + key);
  };
  auto as_double_list = [&] {
    std::vector<double> out;
    for (const std::string& tok : detail::split_list(value))
      out.push_back(detail::parse_number(tok, "config key " + key));
    return out;
  };

  if (key == "dataset.name") cfg.dataset.name = value;
  else if (key == "dataset.nodes") cfg.dataset.node_path = value;
  else if (key == "dataset.edges") cfg.dataset.edge_path = value;
  else if (key == "dataset.sensitive") cfg.dataset.sensitive_col = value;
  else if (key == "dataset.label") cfg.dataset.label_col = value;
  else if (key == "dataset.drop_cols") cfg.dataset.drop_cols = detail::split_list(value);
  else if (key == "dataset.min_ac_train") cfg.dataset.min_ac_train = as_size();
  else if (key == "dataset.min_sens_train") cfg.dataset.min_sens_train = as_size();
  else if (key == "dataset.beta") { cfg.dataset.default_beta = as_double(); cfg.fairac.beta = cfg.dataset.default_beta; }
  else if (key == "method") cfg.method = method_from_string(value);
  else if (key == "alpha") cfg.fairac.alpha = as_double();
  else if (key == "beta") cfg.fairac.beta = as_double();
  else if (key == "epochs") cfg.fairac.epochs = as_int();
  else if (key == "pretrain_epochs") cfg.fairac.pretrain_epochs = as_int();
  else if (key == "eval_start") cfg.fairac.eval_start = as_int();
  else if (key == "eval_every") cfg.fairac.eval_every = as_int();
  else if (key == "acc_threshold") cfg.fairac.acc_threshold = as_double();
  else if (key == "auc_threshold") cfg.fairac.auc_threshold = as_double();
  else if (key == "dropout") cfg.fairac.dropout = as_double();
  else if (key == "adversary_enabled") cfg.fairac.adversary_enabled = as_bool();
  else if (key == "topo_sign")
    cfg.fairac.topo_sign = value == "literal" ? TopoSign::literal : TopoSign::adversarial;
  else if (key == "recon_norm")
    cfg.fairac.recon_norm = value == "l1" ? ReconNorm::l1 : ReconNorm::euclidean;
  else if (key == "unfreeze_encoder") cfg.fairac.unfreeze_encoder = as_bool();
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (double v : as_double_list()) cfg.seeds.push_back(static_cast<std::uint64_t>(v));
  }
  else if (key == "alpha_sweep") cfg.alpha_sweep = as_double_list();
  else if (key == "beta_sweep") cfg.beta_sweep = as_double_list();
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "cache_dir") cfg.cache_dir = value;
  else if (key == "gcn_epochs") cfg.gcn_epochs = as_int();
  else if (key == "similarity_k") cfg.similarity_k = as_size();
  else if (key == "consistency_mode")
    cfg.consistency_mode =
        value == "prediction_pair" ? ConsistencyMode::prediction_pair : ConsistencyMode::paper;
  else if (key == "deepwalk.walks_per_node") cfg.deepwalk.walks_per_node = as_size();
  else if (key == "deepwalk.walk_length") cfg.deepwalk.walk_length = as_size();
  else if (key == "deepwalk.dim") cfg.deepwalk.dim = as_size();
  else if (key == "deepwalk.window") cfg.deepwalk.window = as_size();
  else if (key == "deepwalk.negatives") cfg.deepwalk.negatives = as_size();
  else if (key == "deepwalk.lr") cfg.deepwalk.lr = as_double();
  else throw std::runtime_error("config: unknown key '" + key + "'");
}

inline void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::string key, value;
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) {
      key = detail::trim(line.substr(0, eq));
      value = detail::trim(line.substr(eq + 1));
    } else {
      const std::size_t sp = line.find_first_of(" \t");
      if (sp == std::string::npos)
        throw std::runtime_error("config: malformed line " + std::to_string(line_no) + " in " + path);
      key = detail::trim(line.substr(0, sp));
      value = detail::trim(line.substr(sp + 1));
    }
    apply_config_key(cfg, key, value);
  }
}

// Dataset file paths in config files are relative to the data root, taken
// from FAIRAC_DATA_ROOT unless overridden.
inline void resolve_dataset_paths(ExperimentConfig& cfg, std::string data_root = "") {
  namespace fs = std::filesystem;
  if (data_root.empty()) {
    const char* env = std::getenv(kDataRootEnvVar);
    if (env != nullptr) data_root = env;
  }
  if (data_root.empty()) return;
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (fs::path(data_root) / p).string();
  };
  resolve(cfg.dataset.node_path);
  resolve(cfg.dataset.edge_path);
}

}  // namespace fairac
