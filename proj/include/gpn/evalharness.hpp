// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment protocols: repeated seeded runs over edge-drop and node-ratio
// grids, aggregation into result tables, and method comparisons.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gpn/bilevel.hpp"
#include "gpn/graph.hpp"
#include "gpn/metrics.hpp"
#include "gpn/serialize.hpp"

namespace gpn {

enum class Method { kGcn, kGpnFoa, kGpnFda };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct DatasetSpec {
  // "synthetic-sbm", or a dataset directory (absolute, or relative to the
  // data root / GPN_DATA_DIR).
  std::string name = "synthetic-sbm";
  SbmOptions sbm;
};

struct SplitSpec {
  SplitMode mode = SplitMode::kRandom;
  int per_class_train = 20;
  int per_class_val = 30;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  Method method = Method::kGpnFoa;
  SplitSpec split;
  std::vector<double> drop_ratios = {0.0};
  std::vector<double> node_ratios = {1.0};
  int n_seeds = 5;
  std::uint64_t seed = 0;  // run s uses seed + s
  TrainConfig train;

  void validate() const;
};

Json to_json(const ExperimentSpec& spec);
// Overlays `j` on `base` using the field names of to_json; unknown keys and
// wrong types raise ConfigError naming the field path.
ExperimentSpec experiment_from_json(const Json& j, ExperimentSpec base = {});

// Resolves and loads (or generates) the dataset.
Graph load_graph(const DatasetSpec& spec,
                 const std::optional<std::filesystem::path>& data_root = std::nullopt);

struct RunOutcome {
  double test_accuracy = 0.0;
  RunReport report;
};

// Trains `method` on `graph` with `masks` and returns its test accuracy.
RunOutcome run_method(Method method, const Graph& graph, const SplitMasks& masks,
                      const TrainConfig& config);

// Trains on the subgraph induced by `kept` nodes and scores the full graph's
// test nodes with the full graph's structure.
RunOutcome run_inductive(Method method, const Graph& graph, const SplitMasks& masks,
                         const Subgraph& kept, const TrainConfig& config);

struct ResultRow {
  std::string setting;
  std::string method;
  double drop_ratio = 0.0;
  double node_ratio = 1.0;
  double mean = 0.0;  // percent
  double std = 0.0;   // population std over seeds, percent
  int n_seeds = 0;
  std::vector<double> accuracies;
  std::vector<int> selected_heads;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::string config_hash;
};

// One row per (drop ratio, node ratio) pair, each aggregated over n_seeds
// runs. Runs are distributed over `jobs` threads; the result does not depend
// on `jobs`.
ResultTable run_experiment(const ExperimentSpec& spec, const Graph& graph, int jobs = 1);
ResultTable run_experiment(const ExperimentSpec& spec, int jobs = 1);

struct GapRow {
  std::string setting;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double gap = 0.0;         // mean_a - mean_b
  double pooled_std = 0.0;  // sqrt((std_a² + std_b²) / 2)
};

struct GapReport {
  std::string method_a;
  std::string method_b;
  std::vector<GapRow> rows;
};

// Rows are matched by setting; both tables must list the same settings in the
// same order.
GapReport compare_methods(const ResultTable& a, const ResultTable& b);

Json to_json(const ResultTable& table);
Json to_json(const GapReport& report);

// Columns: setting, method, mean, std, seeds, config_hash.
void write_results_csv(const std::vector<ResultTable>& tables, const std::filesystem::path& path);
// Columns: method, x, y, yerr; x is the drop ratio or, when `by_node_ratio`,
// the node ratio.
void write_plot_csv(const std::vector<ResultTable>& tables, const std::filesystem::path& path,
                    bool by_node_ratio);

}  // namespace gpn
