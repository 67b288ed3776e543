// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/evalharness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "gpn/dataset.hpp"
#include "gpn/errors.hpp"

namespace gpn {

namespace fs = std::filesystem;

std::string method_name(Method m) {
  switch (m) {
    case Method::kGcn: return "gcn";
    case Method::kGpnFoa: return "gpn-foa";
    case Method::kGpnFda: return "gpn-fda";
  }
  return "gcn";
}

Method parse_method(const std::string& name) {
  if (name == "gcn") return Method::kGcn;
  if (name == "gpn-foa") return Method::kGpnFoa;
  if (name == "gpn-fda") return Method::kGpnFda;
  throw ConfigError("unknown method '" + name + "' (expected gcn, gpn-foa or gpn-fda)");
}

void ExperimentSpec::validate() const {
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (drop_ratios.empty() || node_ratios.empty()) throw ConfigError("ratio grids must be non-empty");
  for (double r : drop_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("drop ratios must lie in [0, 1]");
  }
  for (double r : node_ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("node ratios must lie in (0, 1]");
  }
  train.validate();
}

Json to_json(const ExperimentSpec& s) {
  const auto& o = s.dataset.sbm;
  return Json{
      {"dataset",
       {{"name", s.dataset.name},
        {"sbm",
         {{"n_per_block", o.n_per_block},
          {"n_blocks", o.n_blocks},
          {"p_in", o.p_in},
          {"p_out", o.p_out},
          {"feat_dim", o.feat_dim},
          {"feat_noise", o.feat_noise},
          {"seed", o.seed}}}}},
      {"method", method_name(s.method)},
      {"split",
       {{"mode", s.split.mode == SplitMode::kFixed ? "fixed" : "random"},
        {"per_class_train", s.split.per_class_train},
        {"per_class_val", s.split.per_class_val}}},
      {"drop_ratios", s.drop_ratios},
      {"node_ratios", s.node_ratios},
      {"n_seeds", s.n_seeds},
      {"seed", s.seed},
      {"train", to_json(s.train)}};
}

namespace {

void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

std::vector<double> ratio_list(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(json_field<double>(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

SbmOptions sbm_from_json(const Json& j, SbmOptions o, const std::string& path) {
  expect_object(j, path);
  for (const auto& [key, v] : j.items()) {
    const std::string p = path + "." + key;
    if (key == "n_per_block") o.n_per_block = json_field<int>(v, p);
    else if (key == "n_blocks") o.n_blocks = json_field<int>(v, p);
    else if (key == "p_in") o.p_in = json_field<double>(v, p);
    else if (key == "p_out") o.p_out = json_field<double>(v, p);
    else if (key == "feat_dim") o.feat_dim = json_field<int>(v, p);
    else if (key == "feat_noise") o.feat_noise = json_field<double>(v, p);
    else if (key == "seed") o.seed = json_field<std::uint64_t>(v, p);
    else throw ConfigError(p + ": unknown field");
  }
  return o;
}

}  // namespace

ExperimentSpec experiment_from_json(const Json& j, ExperimentSpec s) {
  expect_object(j, "config");
  for (const auto& [key, v] : j.items()) {
    if (key == "dataset") {
      expect_object(v, key);
      for (const auto& [dkey, dv] : v.items()) {
        const std::string p = "dataset." + dkey;
        if (dkey == "name") s.dataset.name = json_field<std::string>(dv, p);
        else if (dkey == "sbm") s.dataset.sbm = sbm_from_json(dv, s.dataset.sbm, p);
        else throw ConfigError(p + ": unknown field");
      }
    } else if (key == "method") {
      try {
        s.method = parse_method(json_field<std::string>(v, key));
      } catch (const ConfigError& e) {
        throw ConfigError("method: " + std::string(e.what()));
      }
    } else if (key == "split") {
      expect_object(v, key);
      for (const auto& [skey, sv] : v.items()) {
        const std::string p = "split." + skey;
        if (skey == "mode") {
          const auto mode = json_field<std::string>(sv, p);
          if (mode == "fixed") s.split.mode = SplitMode::kFixed;
          else if (mode == "random") s.split.mode = SplitMode::kRandom;
          else throw ConfigError(p + ": expected 'fixed' or 'random'");
        } else if (skey == "per_class_train") {
          s.split.per_class_train = json_field<int>(sv, p);
        } else if (skey == "per_class_val") {
          s.split.per_class_val = json_field<int>(sv, p);
        } else {
          throw ConfigError(p + ": unknown field");
        }
      }
    } else if (key == "drop_ratios") {
      s.drop_ratios = ratio_list(v, key);
    } else if (key == "node_ratios") {
      s.node_ratios = ratio_list(v, key);
    } else if (key == "n_seeds") {
      s.n_seeds = json_field<int>(v, key);
    } else if (key == "seed") {
      s.seed = json_field<std::uint64_t>(v, key);
    } else if (key == "train") {
      s.train = train_config_from_json(v, s.train, "train");
    } else {
      throw ConfigError(key + ": unknown field");
    }
  }
  s.validate();
  return s;
}

Graph load_graph(const DatasetSpec& spec, const std::optional<fs::path>& data_root) {
  if (spec.name == "synthetic-sbm") return generate_sbm(spec.sbm);
  fs::path dir(spec.name);
  if (dir.is_relative()) {
    std::optional<fs::path> root = data_root;
    if (!root) {
      if (const char* env = std::getenv("GPN_DATA_DIR")) root = fs::path(env);
    }
    if (root && fs::exists(*root / dir)) dir = *root / dir;
  }
  if (!fs::is_directory(dir)) {
    throw ConfigError("dataset '" + spec.name + "' not found (set GPN_DATA_DIR or give a path)");
  }
  return load_dataset(dir);
}

RunOutcome run_method(Method method, const Graph& graph, const SplitMasks& masks,
                      const TrainConfig& config) {
  if (method == Method::kGcn) {
    auto r = train_gcn_baseline(graph, masks, config);
    return {r.report.test_accuracy, std::move(r.report)};
  }
  TrainConfig c = config;
  c.approx = method == Method::kGpnFoa ? Approx::kFoa : Approx::kFda;
  auto r = train_gpn(graph, masks, c);
  return {r.report.test_accuracy, std::move(r.report)};
}

RunOutcome run_inductive(Method method, const Graph& graph, const SplitMasks& masks,
                         const Subgraph& kept, const TrainConfig& config) {
  const SplitMasks sub_masks{restrict_mask(masks.train, kept.original_index),
                             restrict_mask(masks.val, kept.original_index),
                             restrict_mask(masks.test, kept.original_index)};
  WeightedAdjacency full_structure;
  RunOutcome out;
  PredictorParams pred;
  if (method == Method::kGcn) {
    auto r = train_gcn_baseline(kept.graph, sub_masks, config);
    pred = std::move(r.pred);
    out.report = std::move(r.report);
    full_structure = normalize_adjacency(WeightedAdjacency::from_graph(graph));
  } else {
    TrainConfig c = config;
    c.approx = method == Method::kGpnFoa ? Approx::kFoa : Approx::kFda;
    auto r = train_gpn(kept.graph, sub_masks, c);
    // The generator is size-agnostic; regenerate the structure on the full graph.
    r.model.gen.top_k = c.effective_top_k(graph.n_nodes());
    full_structure = inference_structure(r.model, r.report.selected_head, graph);
    pred = std::move(r.model.pred);
    out.report = std::move(r.report);
  }
  const Matrix probs = predict(pred, graph, full_structure);
  out.test_accuracy = accuracy(probs, graph.labels(), masks.test);
  out.report.test_accuracy = out.test_accuracy;
  return out;
}

namespace {

std::string format_ratio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

struct Task {
  std::size_t row;
  int seed_index;
};

}  // namespace

ResultTable run_experiment(const ExperimentSpec& spec, const Graph& graph, int jobs) {
  spec.validate();
  ResultTable table;
  table.config_hash = hex_hash(config_hash(to_json(spec)));

  for (double node_ratio : spec.node_ratios) {
    for (double drop : spec.drop_ratios) {
      ResultRow row;
      row.setting = "drop=" + format_ratio(drop) + ",nodes=" + format_ratio(node_ratio);
      row.method = method_name(spec.method);
      row.drop_ratio = drop;
      row.node_ratio = node_ratio;
      row.n_seeds = spec.n_seeds;
      row.accuracies.assign(static_cast<std::size_t>(spec.n_seeds), 0.0);
      row.selected_heads.assign(static_cast<std::size_t>(spec.n_seeds), 0);
      table.rows.push_back(std::move(row));
    }
  }

  std::vector<Task> tasks;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (int s = 0; s < spec.n_seeds; ++s) tasks.push_back({r, s});
  }

  auto run_task = [&](const Task& task) {
    ResultRow& row = table.rows[task.row];
    const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(task.seed_index);
    const Graph g = row.drop_ratio > 0.0 ? drop_edges(graph, row.drop_ratio, derive_seed(seed, 7))
                                         : graph;
    const SplitMasks masks = make_splits(g, spec.split.per_class_train, spec.split.per_class_val,
                                         spec.split.mode, seed);
    TrainConfig config = spec.train;
    config.seed = seed;
    RunOutcome outcome;
    if (row.node_ratio < 1.0) {
      Mask required(masks.train.size());
      for (std::size_t i = 0; i < required.size(); ++i) required[i] = masks.train[i] || masks.val[i];
      const Subgraph kept = subsample_nodes(g, row.node_ratio, required, derive_seed(seed, 11));
      outcome = run_inductive(spec.method, g, masks, kept, config);
    } else {
      outcome = run_method(spec.method, g, masks, config);
    }
    row.accuracies[static_cast<std::size_t>(task.seed_index)] = outcome.test_accuracy;
    row.selected_heads[static_cast<std::size_t>(task.seed_index)] = outcome.report.selected_head;
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    for (const auto& t : tasks) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
          try {
            run_task(tasks[i]);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  for (auto& row : table.rows) {
    double sum = 0.0;
    for (double a : row.accuracies) sum += a;
    row.mean = sum / static_cast<double>(row.accuracies.size());
    double sq = 0.0;
    for (double a : row.accuracies) sq += (a - row.mean) * (a - row.mean);
    row.std = std::sqrt(sq / static_cast<double>(row.accuracies.size()));
  }
  return table;
}

ResultTable run_experiment(const ExperimentSpec& spec, int jobs) {
  return run_experiment(spec, load_graph(spec.dataset), jobs);
}

GapReport compare_methods(const ResultTable& a, const ResultTable& b) {
  if (a.rows.size() != b.rows.size()) {
    throw ConfigError("compare_methods: tables have " + std::to_string(a.rows.size()) + " and " +
                      std::to_string(b.rows.size()) + " rows");
  }
  GapReport report;
  report.method_a = a.rows.empty() ? "" : a.rows.front().method;
  report.method_b = b.rows.empty() ? "" : b.rows.front().method;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& ra = a.rows[i];
    const auto& rb = b.rows[i];
    if (ra.setting != rb.setting) {
      throw ConfigError("compare_methods: setting '" + ra.setting + "' does not match '" +
                        rb.setting + "'");
    }
    report.rows.push_back({ra.setting, ra.mean, rb.mean, ra.mean - rb.mean,
                           std::sqrt((ra.std * ra.std + rb.std * rb.std) / 2.0)});
  }
  return report;
}

Json to_json(const ResultTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"setting", r.setting},
                    {"method", r.method},
                    {"drop_ratio", r.drop_ratio},
                    {"node_ratio", r.node_ratio},
                    {"mean", r.mean},
                    {"std", r.std},
                    {"seeds", r.n_seeds},
                    {"accuracies", r.accuracies},
                    {"selected_heads", r.selected_heads}});
  }
  return Json{{"config_hash", table.config_hash}, {"rows", rows}};
}

Json to_json(const GapReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"setting", r.setting},
                    {"mean_a", r.mean_a},
                    {"mean_b", r.mean_b},
                    {"gap", r.gap},
                    {"pooled_std", r.pooled_std}});
  }
  return Json{{"method_a", report.method_a}, {"method_b", report.method_b}, {"rows", rows}};
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

void write_results_csv(const std::vector<ResultTable>& tables, const fs::path& path) {
  auto out = open_csv(path);
  out << "setting,method,mean,std,seeds,config_hash\n";
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      out << '"' << r.setting << "\"," << r.method << ',' << r.mean << ',' << r.std << ','
          << r.n_seeds << ',' << t.config_hash << '\n';
    }
  }
}

void write_plot_csv(const std::vector<ResultTable>& tables, const fs::path& path,
                    bool by_node_ratio) {
  auto out = open_csv(path);
  out << "method,x,y,yerr\n";
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      out << r.method << ',' << (by_node_ratio ? r.node_ratio : r.drop_ratio) << ',' << r.mean
          << ',' << r.std << '\n';
    }
  }
}

}  // namespace gpn
