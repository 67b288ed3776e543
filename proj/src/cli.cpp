// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/cli.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gpn/dataset.hpp"
#include "gpn/errors.hpp"
#include "gpn/gradcheck.hpp"
#include "gpn/metrics.hpp"

namespace gpn {

namespace fs = std::filesystem;

namespace {

constexpr double kGradCheckTolerance = 1e-4;

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::string dataset;
  std::string checkpoint;
  int cases = 100;
  std::string dataset_dir;
  bool write_gradcheck = false;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Builds the experiment spec from the config file, overrides and flags; also
// returns the methods named by --method (a comma list) or the config.
ExperimentSpec resolve_spec(const Options& o, std::vector<Method>* methods) {
  Json doc = Json::object();
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) throw ConfigError("config file not found: " + o.config_path);
    doc = read_json_file(o.config_path);
  }
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (!o.dataset.empty()) doc["dataset"]["name"] = o.dataset;
  ExperimentSpec spec = experiment_from_json(doc);
  if (o.seed) {
    spec.seed = *o.seed;
    spec.train.seed = *o.seed;
  }
  std::vector<Method> ms;
  for (const auto& m : split_commas(o.method)) ms.push_back(parse_method(m));
  if (ms.empty()) ms.push_back(spec.method);
  spec.method = ms.front();
  if (methods) *methods = ms;
  return spec;
}

SplitMasks split_for(const ExperimentSpec& spec, const Graph& graph) {
  return make_splits(graph, spec.split.per_class_train, spec.split.per_class_val, spec.split.mode,
                     spec.seed);
}

int cmd_train(const Options& o, std::ostream& out) {
  const ExperimentSpec spec = resolve_spec(o, nullptr);
  const Graph graph = load_graph(spec.dataset);
  const SplitMasks masks = split_for(spec, graph);
  TrainConfig config = spec.train;
  config.seed = spec.seed;
  const fs::path dir(o.out_dir);
  RunReport report;
  if (spec.method == Method::kGcn) {
    auto r = train_gcn_baseline(graph, masks, config);
    save_checkpoint(r.pred, dir);
    report = std::move(r.report);
  } else {
    config.approx = spec.method == Method::kGpnFoa ? Approx::kFoa : Approx::kFda;
    auto r = train_gpn(graph, masks, config);
    save_checkpoint(r.model, dir);
    report = std::move(r.report);
  }
  write_json_file(to_json(spec), dir / "config.json");
  write_json_file(to_json(report), dir / "report.json");
  out << report.method << ": train " << report.train_accuracy << "% val " << report.val_accuracy
      << "% test " << report.test_accuracy << "% (best epoch " << report.best_epoch << ", head "
      << report.selected_head << ")\n";
  out << "wrote " << (dir / "report.json").string() << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const ExperimentSpec spec = resolve_spec(o, nullptr);
  const Graph graph = load_graph(spec.dataset);
  const SplitMasks masks = split_for(spec, graph);
  const fs::path ck_dir(o.checkpoint.empty() ? o.out_dir : o.checkpoint);
  const Checkpoint ck = load_checkpoint(ck_dir);
  int head = 0;
  WeightedAdjacency structure;
  if (ck.gen) {
    if (fs::exists(ck_dir / "report.json")) {
      head = read_json_file(ck_dir / "report.json").value("selected_head", 0);
    }
    structure = inference_structure(GpnModel{ck.pred, *ck.gen}, head, graph);
  } else {
    structure = normalize_adjacency(WeightedAdjacency::from_graph(graph));
  }
  const Matrix probs = predict(ck.pred, graph, structure);
  const Json result = {{"checkpoint", ck_dir.string()},
                       {"head", head},
                       {"train_accuracy", accuracy(probs, graph.labels(), masks.train)},
                       {"val_accuracy", accuracy(probs, graph.labels(), masks.val)},
                       {"test_accuracy", accuracy(probs, graph.labels(), masks.test)}};
  write_json_file(result, fs::path(o.out_dir) / "eval.json");
  out << result.dump(2) << '\n';
  return 0;
}

int cmd_grid(const Options& o, std::ostream& out, bool inductive) {
  std::vector<Method> methods;
  ExperimentSpec spec = resolve_spec(o, &methods);
  if (inductive) {
    spec.drop_ratios = {0.0};
  } else {
    spec.node_ratios = {1.0};
  }
  const Graph graph = load_graph(spec.dataset);
  std::vector<ResultTable> tables;
  Json doc = {{"tables", Json::array()}, {"gaps", Json::array()}};
  for (Method m : methods) {
    spec.method = m;
    tables.push_back(run_experiment(spec, graph, o.jobs));
    doc["tables"].push_back(to_json(tables.back()));
    for (const auto& row : tables.back().rows) {
      out << row.method << ' ' << row.setting << ": " << row.mean << " +- " << row.std << '\n';
    }
  }
  for (std::size_t i = 1; i < tables.size(); ++i) {
    const GapReport gap = compare_methods(tables[i], tables[0]);
    doc["gaps"].push_back(to_json(gap));
    for (const auto& row : gap.rows) {
      out << gap.method_a << " - " << gap.method_b << ' ' << row.setting << ": " << row.gap << '\n';
    }
  }
  const fs::path dir(o.out_dir);
  write_json_file(doc, dir / "results.json");
  write_results_csv(tables, dir / "results.csv");
  write_plot_csv(tables, dir / "plot.csv", inductive);
  out << "wrote " << (dir / "results.json").string() << '\n';
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto result = run_gradcheck_suite(o.cases, o.seed.value_or(0));
  Json entries = Json::array();
  for (const auto& e : result.entries) {
    out << e.name << ": max rel error " << e.max_rel_error << " over " << e.n_checks << " checks\n";
    entries.push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"checks", e.n_checks}});
  }
  out << "max rel error " << result.max_rel_error << " over " << result.n_cases << " cases\n";
  if (o.write_gradcheck) {
    write_json_file({{"cases", result.n_cases},
                     {"max_rel_error", result.max_rel_error},
                     {"entries", entries}},
                    fs::path(o.out_dir) / "gradcheck.json");
  }
  return result.max_rel_error < kGradCheckTolerance ? 0 : 1;
}

int cmd_convert_check(const Options& o, std::ostream& out, std::ostream& err) {
  const VerifyReport report = verify_dataset(o.dataset_dir);
  out << o.dataset_dir << ": " << report.meta.n_nodes << " nodes, " << report.meta.n_features
      << " features, " << report.meta.n_classes << " classes, " << report.n_edges << " edges"
      << (report.has_fixed_split ? ", fixed split" : "") << '\n';
  for (const auto& issue : report.issues) err << "issue: " << issue << '\n';
  out << (report.ok() ? "OK" : "FAILED") << '\n';
  return report.ok() ? 0 : 1;
}

}  // namespace

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty path segment");
    pointer += "/" + part;
  }
  try {
    config[Json::json_pointer(pointer)] = value;
  } catch (const Json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint graph-structure and node-classifier learning", "gpn"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--set", o.overrides, "dotted.key=value override (repeatable)");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--method", o.method, "gcn, gpn-foa or gpn-fda (comma list for grids)");
    sub->add_option("--dataset", o.dataset, "synthetic-sbm or a dataset directory");
  };

  auto* train = app.add_subcommand("train", "train one model and write report + checkpoint");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory (defaults to --out)");
  auto* sweep = app.add_subcommand("sweep", "edge-drop grid");
  add_common(sweep);
  sweep->add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
  auto* inductive = app.add_subcommand("inductive", "node-ratio grid");
  add_common(inductive);
  inductive->add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--cases", o.cases, "random cases")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", o.seed, "suite seed");
  gradcheck->add_option("--out", o.out_dir, "write gradcheck.json here");
  auto* convert_check = app.add_subcommand("convert-check", "validate a dataset directory");
  convert_check->add_option("dir", o.dataset_dir, "dataset directory")->required();

  if (!args.empty() && !args.front().empty() && args.front().front() != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args.front();
    if (!known) {
      err << "error: unknown command '" << args.front() << "'\n" << app.help();
      return 2;
    }
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (sweep->parsed()) return cmd_grid(o, out, false);
    if (inductive->parsed()) return cmd_grid(o, out, true);
    if (gradcheck->parsed()) {
      o.write_gradcheck = gradcheck->count("--out") > 0;
      return cmd_gradcheck(o, out);
    }
    if (convert_check->parsed()) return cmd_convert_check(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace gpn
