// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the package wrapper.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gpn/bilevel.hpp"
#include "gpn/cli.hpp"
#include "gpn/dataset.hpp"
#include "gpn/errors.hpp"
#include "gpn/evalharness.hpp"
#include "gpn/gradcheck.hpp"
#include "gpn/serialize.hpp"

namespace py = pybind11;
using namespace gpn;

namespace {

ExperimentSpec spec_from_text(const std::string& config_json) {
  return experiment_from_json(config_json.empty() ? Json::object() : Json::parse(config_json));
}

std::string train_json(const std::string& config_json) {
  const ExperimentSpec spec = spec_from_text(config_json);
  const Graph graph = load_graph(spec.dataset);
  const SplitMasks masks = make_splits(graph, spec.split.per_class_train, spec.split.per_class_val,
                                       spec.split.mode, spec.seed);
  TrainConfig config = spec.train;
  config.seed = spec.seed;
  RunOutcome outcome;
  {
    py::gil_scoped_release release;
    outcome = run_method(spec.method, graph, masks, config);
  }
  return to_json(outcome.report).dump();
}

std::string experiment_json(const std::string& config_json, int jobs) {
  const ExperimentSpec spec = spec_from_text(config_json);
  ResultTable table;
  {
    py::gil_scoped_release release;
    table = run_experiment(spec, jobs);
  }
  return to_json(table).dump();
}

std::string gradcheck_json(int cases, std::uint64_t seed) {
  GradCheckSuiteResult r;
  {
    py::gil_scoped_release release;
    r = run_gradcheck_suite(cases, seed);
  }
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"checks", e.n_checks}});
  }
  return Json{{"cases", r.n_cases}, {"max_rel_error", r.max_rel_error}, {"entries", entries}}.dump();
}

py::tuple cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = run_cli(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

py::dict graph_dict(const Graph& g) {
  Eigen::Matrix<int, Eigen::Dynamic, 2, Eigen::RowMajor> edges(g.n_edges(), 2);
  const auto list = g.edge_list();
  for (std::size_t k = 0; k < list.size(); ++k) {
    edges(static_cast<Eigen::Index>(k), 0) = list[k].u;
    edges(static_cast<Eigen::Index>(k), 1) = list[k].v;
  }
  py::dict d;
  d["features"] = g.features();
  d["edges"] = edges;
  d["labels"] = g.labels();
  d["n_classes"] = g.n_classes();
  return d;
}

}  // namespace

PYBIND11_MODULE(_gpn, m) {
  m.doc() = "Graph structure learning with bilevel optimization";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  m.def("train_json", &train_json, py::arg("config_json") = "",
        "Train one model from an experiment config (JSON text); returns the report as JSON text.");
  m.def("experiment_json", &experiment_json, py::arg("config_json") = "", py::arg("jobs") = 1,
        "Run a seeded experiment grid; returns the result table as JSON text.");
  m.def("gradcheck_json", &gradcheck_json, py::arg("cases") = 100, py::arg("seed") = 0,
        "Finite-difference gradient suite; returns JSON text.");
  m.def("run_cli", &cli, py::arg("args"),
        "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
  m.def(
      "generate_sbm",
      [](int n_per_block, int n_blocks, double p_in, double p_out, int feat_dim, double feat_noise,
         std::uint64_t seed) {
        return graph_dict(
            generate_sbm(SbmOptions{n_per_block, n_blocks, p_in, p_out, feat_dim, feat_noise, seed}));
      },
      py::arg("n_per_block") = 100, py::arg("n_blocks") = 2, py::arg("p_in") = 0.1,
      py::arg("p_out") = 0.01, py::arg("feat_dim") = 16, py::arg("feat_noise") = 1.0,
      py::arg("seed") = 0, "Stochastic block model graph as a dict of arrays.");
  m.def(
      "load_dataset", [](const std::string& dir) { return graph_dict(load_dataset(dir)); },
      py::arg("dir"), "Load a dataset directory as a dict of arrays.");
  m.def(
      "verify_dataset",
      [](const std::string& dir) {
        const VerifyReport r = verify_dataset(dir);
        py::dict d;
        d["ok"] = r.ok();
        d["issues"] = r.issues;
        d["n_nodes"] = r.meta.n_nodes;
        d["n_features"] = r.meta.n_features;
        d["n_classes"] = r.meta.n_classes;
        d["n_edges"] = r.n_edges;
        d["has_fixed_split"] = r.has_fixed_split;
        return d;
      },
      py::arg("dir"), "Check a dataset directory; returns a dict with `ok` and `issues`.");
  m.def(
      "normalize_adjacency",
      [](const Matrix& a) { return normalize_adjacency(WeightedAdjacency(a, false)).to_dense(); },
      py::arg("adjacency"), "D^-1/2 (A + I) D^-1/2 of a dense symmetric matrix.");
}
