#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairac/dataset.hpp"
#include "fairac/deepwalk.hpp"
#include "fairac/gcn.hpp"
#include "fairac/graph.hpp"
#include "fairac/io.hpp"
#include "fairac/metrics.hpp"
#include "fairac/trainer.hpp"

namespace fairac {

enum class Method { gcn, fairac, base_ac };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::gcn: return "gcn";
    case Method::fairac: return "fairac";
    case Method::base_ac: return "base_ac";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "gcn") return Method::gcn;
  if (s == "fairac") return Method::fairac;
  if (s == "base_ac" || s == "base-ac") return Method::base_ac;
  throw std::invalid_argument("unknown method '" + s + "' (expected gcn|fairac|base-ac)");
}

struct ExperimentConfig {
  DatasetSpec dataset;
  FairACConfig fairac;
  Method method = Method::fairac;
  std::vector<std::uint64_t> seeds{40, 41, 42};
  std::vector<double> alpha_sweep{0.1, 0.3, 0.5, 0.8};
  std::vector<double> beta_sweep{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::string out_dir = "results";
  std::string cache_dir = "cache";
  int gcn_epochs = 800;  // downstream classifier epochs per evaluation
  DeepwalkConfig deepwalk;
  std::size_t similarity_k = 10;
  ConsistencyMode consistency_mode = ConsistencyMode::paper;

  void validate() const {
    if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: seeds must be nonempty");
    fairac.validate();
    for (double a : alpha_sweep)
      if (a < 0.0 || a >= 1.0) throw std::invalid_argument("ExperimentConfig: alpha sweep value out of range");
    for (double b : beta_sweep)
      if (b < 0.0) throw std::invalid_argument("ExperimentConfig: beta sweep value out of range");
  }
};

struct SeedResult {
  std::uint64_t seed = 0;
  int selected_index = -1;  // into evals; -1 means nothing qualified
  bool qualified = false;
  EvalReport report;  // selected evaluation, or best-accuracy fallback
  std::vector<int> eval_epochs;
  std::vector<EvalReport> evals;
};

struct ResultRecord {
  std::string dataset;
  std::string method;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<SeedResult> per_seed;
  EvalReport mean;
  EvalReport stddev;  // sample standard deviation, n-1 denominator
  bool no_qualified_model = false;
  std::string error;  // nonempty when a sweep entry failed
};

// Fairest qualifying evaluation: among entries with acc and auc above the
// thresholds, the minimal dsp+deo; ties resolve to the earliest epoch.
// Returns -1 when nothing qualifies.
inline int select_best(const std::vector<EvalReport>& evals, double acc_thr, double auc_thr) {
  if (evals.empty()) throw std::invalid_argument("select_best: no evaluations");
  int best = -1;
  for (int i = 0; i < static_cast<int>(evals.size()); ++i) {
    if (evals[i].acc < acc_thr || evals[i].auc < auc_thr) continue;
    if (best == -1 || evals[i].dsp_plus_deo < evals[best].dsp_plus_deo) best = i;
  }
  return best;
}

namespace detail {

inline Graph clone_graph(const Graph& g) {
  Graph out;
  out.n_nodes = g.n_nodes;
  out.edges = g.edges;
  out.features = Tensor(g.features.rows(), g.features.cols());
  out.features.value() = g.features.value();
  out.feature_present = g.feature_present;
  out.sensitive = g.sensitive;
  out.labels = g.labels;
  out.finalize();
  return out;
}

inline std::vector<std::uint32_t> labeled_subset(const Graph& g,
                                                 const std::vector<std::uint32_t>& nodes) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t u : nodes)
    if (g.labels[u] != kUnlabeled) out.push_back(u);
  return out;
}

struct EvalContext {
  std::vector<std::uint32_t> test_nodes;  // labeled test nodes
  std::vector<std::int8_t> test_labels;
  std::vector<std::int8_t> test_sensitive;
  SimilarityGraph similarity;  // over test_nodes, pre-mask features
  ConsistencyMode mode = ConsistencyMode::paper;
};

inline EvalContext make_eval_context(const Graph& unmasked, const DataSplit& split,
                                     std::size_t k, ConsistencyMode mode) {
  EvalContext ctx;
  ctx.mode = mode;
  ctx.test_nodes = labeled_subset(unmasked, split.test);
  if (ctx.test_nodes.empty()) throw std::runtime_error("evaluation: no labeled test nodes");
  const std::size_t d = unmasked.feature_dim();
  Tensor feats(ctx.test_nodes.size(), d);
  for (std::size_t i = 0; i < ctx.test_nodes.size(); ++i) {
    const std::uint32_t u = ctx.test_nodes[i];
    ctx.test_labels.push_back(unmasked.labels[u]);
    ctx.test_sensitive.push_back(unmasked.sensitive[u]);
    std::copy_n(unmasked.features.value().data() + u * d, d, feats.value().data() + i * d);
  }
  ctx.similarity = build_similarity(feats, k);
  return ctx;
}

inline EvalReport evaluate_predictions(const Prediction& p, const EvalContext& ctx) {
  return make_eval_report(p.preds, p.scores, ctx.test_labels, ctx.test_sensitive, ctx.similarity,
                          ctx.mode);
}

}  // namespace detail

// Full protocol for one (dataset, method, alpha, beta) cell: per seed, mask
// the graph, compute topological embeddings (cached), train the method, and
// from eval_start every eval_every epochs train a downstream GCN on the
// produced embeddings and evaluate it on the labeled test nodes; finally pick
// the fairest qualifying evaluation per seed and aggregate across seeds.
inline ResultRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Graph base = load_dataset(cfg.dataset);
  const DataSplit split = make_split(base.n_nodes, identity_ordering(base.n_nodes));
  detail::EvalContext ctx =
      detail::make_eval_context(base, split, cfg.similarity_k, cfg.consistency_mode);
  const std::vector<std::uint32_t> gnn_train = detail::labeled_subset(base, split.gnn_train);

  ResultRecord record;
  record.dataset = cfg.dataset.name;
  record.method = method_name(cfg.method);
  record.alpha = cfg.fairac.alpha;
  record.beta = cfg.fairac.beta;

  for (std::uint64_t seed : cfg.seeds) {
    Graph g = detail::clone_graph(base);
    Rng mask_rng = Rng::forked(seed, /*stream=*/1);
    apply_missing(g, cfg.fairac.alpha, mask_rng);
    const NormalizedAdjacency adj = normalize_adjacency(g);

    SeedResult sr;
    sr.seed = seed;
    std::vector<EvalReport>& evals = sr.evals;

    auto eval_epoch = [&](int epoch) {
      return epoch >= cfg.fairac.eval_start && (epoch - cfg.fairac.eval_start) % cfg.fairac.eval_every == 0;
    };

    if (cfg.method == Method::gcn) {
      // Control arm: the classifier itself trains on the masked raw features
      // for the same schedule, snapshot-evaluated like the completion arms.
      Rng rng = Rng::forked(seed, /*stream=*/5);
      GcnModel model(g.features.cols(), rng);
      AdamState opt(model.parameters());
      std::vector<std::size_t> rows(gnn_train.begin(), gnn_train.end());
      Tensor targets(gnn_train.size(), 1);
      for (std::size_t i = 0; i < gnn_train.size(); ++i)
        targets.value()[i] = static_cast<double>(g.labels[gnn_train[i]]);
      for (int epoch = 1; epoch <= cfg.fairac.epochs; ++epoch) {
        Tape tape;
        Tensor logits = model.logits(tape, g.features, adj, /*training=*/true, &rng);
        Tensor loss = bce_with_logits(tape, gather_rows(tape, logits, rows), targets);
        backward(tape, loss);
        opt.step();
        if (eval_epoch(epoch)) {
          sr.eval_epochs.push_back(epoch);
          evals.push_back(detail::evaluate_predictions(
              gcn_predict(model, g.features, adj, ctx.test_nodes), ctx));
        }
      }
    } else {
      Tensor topo = topo_embeddings_cached(cfg.cache_dir, cfg.dataset.name, seed, g, cfg.deepwalk);
      FairACConfig fcfg = cfg.fairac;
      fcfg.seed = seed;
      if (cfg.method == Method::base_ac) {
        fcfg.adversary_enabled = false;
        fcfg.beta = 0.0;
      }
      FairACTrainer trainer(g, split, topo, fcfg, cfg.dataset.min_ac_train,
                            cfg.dataset.min_sens_train);
      trainer.pretrain();
      int eval_index = 0;
      for (int epoch = fcfg.pretrain_epochs + 1; epoch <= fcfg.epochs; ++epoch) {
        if (cfg.method == Method::base_ac)
          trainer.train_epoch_base();
        else
          trainer.train_epoch();
        if (eval_epoch(epoch)) {
          sr.eval_epochs.push_back(epoch);
          Tensor emb = trainer.produce_embeddings();
          Rng gcn_rng = Rng::forked(seed, 100 + static_cast<std::uint64_t>(eval_index++));
          GcnModel gcn = train_gcn(emb, adj, g.labels, gnn_train, cfg.gcn_epochs, gcn_rng);
          evals.push_back(
              detail::evaluate_predictions(gcn_predict(gcn, emb, adj, ctx.test_nodes), ctx));
        }
      }
    }

    if (evals.empty()) throw std::runtime_error("run_experiment: schedule produced no evaluation");
    sr.selected_index = select_best(evals, cfg.fairac.acc_threshold, cfg.fairac.auc_threshold);
    sr.qualified = sr.selected_index >= 0;
    if (sr.qualified) {
      sr.report = evals[static_cast<std::size_t>(sr.selected_index)];
    } else {
      // Fallback reported separately under the no_qualified_model flag:
      // the highest-accuracy evaluation, never silently relaxed thresholds.
      std::size_t best_acc = 0;
      for (std::size_t i = 1; i < evals.size(); ++i)
        if (evals[i].acc > evals[best_acc].acc) best_acc = i;
      sr.selected_index = static_cast<int>(best_acc);
      sr.report = evals[best_acc];
      record.no_qualified_model = true;
    }
    record.per_seed.push_back(std::move(sr));
  }

  // Aggregate mean and sample standard deviation across seeds.
  auto aggregate = [&](auto metric) {
    const double n = static_cast<double>(record.per_seed.size());
    double mean = 0.0;
    for (const SeedResult& s : record.per_seed) mean += metric(s.report);
    mean /= n;
    double var = 0.0;
    if (record.per_seed.size() > 1) {
      for (const SeedResult& s : record.per_seed) {
        const double d = metric(s.report) - mean;
        var += d * d;
      }
      var /= (n - 1.0);
    }
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  auto set_all = [&](double EvalReport::*field) {
    auto [m, s] = aggregate([field](const EvalReport& r) { return r.*field; });
    record.mean.*field = m;
    record.stddev.*field = s;
  };
  set_all(&EvalReport::acc);
  set_all(&EvalReport::auc);
  set_all(&EvalReport::dsp);
  set_all(&EvalReport::deo);
  set_all(&EvalReport::dsp_plus_deo);
  set_all(&EvalReport::consistency);
  return record;
}

enum class SweepParam { alpha, beta };

// One run per value; a failing entry is recorded with its error instead of
// aborting the remaining values.
inline std::vector<ResultRecord> sweep(const ExperimentConfig& cfg, SweepParam param,
                                       const std::vector<double>& values) {
  std::vector<ResultRecord> out;
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (param == SweepParam::alpha)
      c.fairac.alpha = v;
    else
      c.fairac.beta = v;
    try {
      out.push_back(run_experiment(c));
    } catch (const std::exception& e) {
      ResultRecord r;
      r.dataset = cfg.dataset.name;
      r.method = method_name(cfg.method);
      r.alpha = c.fairac.alpha;
      r.beta = c.fairac.beta;
      r.error = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

// --- serialization ----------------------------------------------------------

inline json report_to_json(const EvalReport& r) {
  return json{{"acc", r.acc},       {"auc", r.auc},
              {"dsp", r.dsp},       {"deo", r.deo},
              {"dsp_plus_deo", r.dsp_plus_deo}, {"consistency", r.consistency}};
}

inline EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.acc = j.at("acc").get<double>();
  r.auc = j.at("auc").get<double>();
  r.dsp = j.at("dsp").get<double>();
  r.deo = j.at("deo").get<double>();
  r.dsp_plus_deo = j.at("dsp_plus_deo").get<double>();
  r.consistency = j.at("consistency").get<double>();
  return r;
}

inline json record_to_json(const ResultRecord& r) {
  json seeds = json::array();
  for (const SeedResult& s : r.per_seed) {
    json evals = json::array();
    for (const EvalReport& e : s.evals) evals.push_back(report_to_json(e));
    seeds.push_back(json{{"seed", s.seed},
                         {"selected_index", s.selected_index},
                         {"qualified", s.qualified},
                         {"report", report_to_json(s.report)},
                         {"eval_epochs", s.eval_epochs},
                         {"evals", std::move(evals)}});
  }
  return json{{"dataset", r.dataset},
              {"method", r.method},
              {"alpha", r.alpha},
              {"beta", r.beta},
              {"per_seed", std::move(seeds)},
              {"mean", report_to_json(r.mean)},
              {"stddev", report_to_json(r.stddev)},
              {"no_qualified_model", r.no_qualified_model},
              {"error", r.error}};
}

inline ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  r.dataset = j.at("dataset").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.alpha = j.at("alpha").get<double>();
  r.beta = j.at("beta").get<double>();
  for (const json& sj : j.at("per_seed")) {
    SeedResult s;
    s.seed = sj.at("seed").get<std::uint64_t>();
    s.selected_index = sj.at("selected_index").get<int>();
    s.qualified = sj.at("qualified").get<bool>();
    s.report = report_from_json(sj.at("report"));
    s.eval_epochs = sj.at("eval_epochs").get<std::vector<int>>();
    for (const json& ej : sj.at("evals")) s.evals.push_back(report_from_json(ej));
    r.per_seed.push_back(std::move(s));
  }
  r.mean = report_from_json(j.at("mean"));
  r.stddev = report_from_json(j.at("stddev"));
  r.no_qualified_model = j.at("no_qualified_model").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

enum class ResultFormat { json_format, csv, markdown };

inline ResultFormat format_from_string(const std::string& s) {
  if (s == "json") return ResultFormat::json_format;
  if (s == "csv") return ResultFormat::csv;
  if (s == "md" || s == "markdown") return ResultFormat::markdown;
  throw std::invalid_argument("unknown format '" + s + "' (expected json|csv|md)");
}

namespace detail {

// "66.51 ± 1.09": percent scale with two decimals. Consistency is already
// stored x100, everything else is a fraction here.
inline std::string mean_std_cell(double mean, double stddev, bool scale100) {
  char buf[64];
  const double f = scale100 ? 100.0 : 1.0;
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean * f, stddev * f);
  return buf;
}

inline std::vector<std::string> record_cells(const ResultRecord& r) {
  return {mean_std_cell(r.mean.acc, r.stddev.acc, true),
          mean_std_cell(r.mean.auc, r.stddev.auc, true),
          mean_std_cell(r.mean.dsp, r.stddev.dsp, true),
          mean_std_cell(r.mean.deo, r.stddev.deo, true),
          mean_std_cell(r.mean.dsp_plus_deo, r.stddev.dsp_plus_deo, true),
          mean_std_cell(r.mean.consistency, r.stddev.consistency, false)};
}

}  // namespace detail

inline const std::vector<std::string>& metric_column_names() {
  static const std::vector<std::string> names{"Acc ↑",      "AUC ↑",       "ΔSP ↓",
                                              "ΔEO ↓",      "ΔSP+ΔEO ↓",   "Consistency ↑"};
  return names;
}

// Writes records to `path` in the requested format. Metric columns follow the
// main-table order: Acc, AUC, dSP, dEO, dSP+dEO, Consistency.
inline void emit_results(const std::vector<ResultRecord>& records, ResultFormat format,
                         const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::path(path).has_parent_path()) {
    std::error_code ec;
    fs::create_directories(fs::path(path).parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_results: cannot write " + path);
  switch (format) {
    case ResultFormat::json_format: {
      json j = json::array();
      for (const ResultRecord& r : records) j.push_back(record_to_json(r));
      out << j.dump(2) << "\n";
      break;
    }
    case ResultFormat::csv: {
      out << "dataset,method,alpha,beta,Acc,AUC,DSP,DEO,DSP+DEO,Consistency,flags\n";
      for (const ResultRecord& r : records) {
        out << r.dataset << ',' << r.method << ',' << r.alpha << ',' << r.beta;
        if (r.error.empty()) {
          for (const std::string& c : detail::record_cells(r)) out << ",\"" << c << "\"";
          out << ',' << (r.no_qualified_model ? "no_qualified_model" : "");
        } else {
          out << ",,,,,,," << "error";
        }
        out << '\n';
      }
      break;
    }
    case ResultFormat::markdown: {
      out << "| Dataset | Method | α | β |";
      for (const std::string& name : metric_column_names()) out << ' ' << name << " |";
      out << " Flags |\n";
      out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
      for (const ResultRecord& r : records) {
        out << "| " << r.dataset << " | " << r.method << " | " << r.alpha << " | " << r.beta
            << " |";
        if (r.error.empty()) {
          for (const std::string& c : detail::record_cells(r)) out << ' ' << c << " |";
          out << ' ' << (r.no_qualified_model ? "no_qualified_model" : "") << " |\n";
        } else {
          out << " | | | | | | error: " << r.error << " |\n";
        }
      }
      break;
    }
  }
}

}  // namespace fairac
