// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gpn/dataset.hpp"
#include "gpn/errors.hpp"
#include "gpn/evalharness.hpp"
#include "test_util.hpp"

using namespace gpn;
namespace fs = std::filesystem;

namespace {

ExperimentSpec small_spec(Method m) {
  ExperimentSpec s;
  s.dataset.sbm = SbmOptions{12, 2, 0.4, 0.03, 4, 0.8, 1};
  s.method = m;
  s.split = {SplitMode::kRandom, 3, 3};
  s.n_seeds = 3;
  s.train.epochs_pretrain = 2;
  s.train.epochs_main = 4;
  s.train.hidden = 6;
  s.train.gen_hidden = 6;
  s.train.gen_embed = 4;
  return s;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run_experiment table shape and aggregation") {
  ExperimentSpec s = small_spec(Method::kGpnFoa);
  s.drop_ratios = {0.0, 0.5};
  s.node_ratios = {1.0, 0.8};
  const ResultTable t = run_experiment(s);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0].setting == "drop=0,nodes=1");
  CHECK(t.rows[1].setting == "drop=0.5,nodes=1");
  CHECK(t.rows[2].setting == "drop=0,nodes=0.8");
  CHECK(t.config_hash.size() == 16);
  for (const auto& r : t.rows) {
    CHECK(r.method == "gpn-foa");
    REQUIRE(r.accuracies.size() == 3);
    double sum = 0.0;
    for (double a : r.accuracies) {
      CHECK(a >= 0.0);
      CHECK(a <= 100.0);
      sum += a;
    }
    CHECK(std::abs(r.mean - sum / 3.0) < 1e-12);
    double sq = 0.0;
    for (double a : r.accuracies) sq += (a - r.mean) * (a - r.mean);
    CHECK(std::abs(r.std - std::sqrt(sq / 3.0)) < 1e-12);
    CHECK(r.selected_heads == std::vector<int>{0, 0, 0});
  }
}

TEST_CASE("run_experiment is deterministic and independent of jobs") {
  const ExperimentSpec s = small_spec(Method::kGpnFoa);
  const Graph g = load_graph(s.dataset);
  const ResultTable a = run_experiment(s, g, 1);
  const ResultTable b = run_experiment(s, g, 1);
  const ResultTable c = run_experiment(s, g, 3);
  CHECK(a.rows[0].accuracies == b.rows[0].accuracies);
  CHECK(a.rows[0].accuracies == c.rows[0].accuracies);
  CHECK(to_json(a) == to_json(c));
}

TEST_CASE("a single seed has std 0 and equals a plain run") {
  ExperimentSpec s = small_spec(Method::kGcn);
  s.n_seeds = 1;
  s.seed = 4;
  const Graph g = load_graph(s.dataset);
  const ResultTable t = run_experiment(s, g);
  CHECK(t.rows[0].std == 0.0);
  const SplitMasks masks = make_splits(g, 3, 3, SplitMode::kRandom, 4);
  TrainConfig c = s.train;
  c.seed = 4;
  CHECK(t.rows[0].mean == run_method(Method::kGcn, g, masks, c).test_accuracy);
}

TEST_CASE("run_inductive with every node kept matches run_method") {
  const ExperimentSpec s = small_spec(Method::kGpnFoa);
  const Graph g = load_graph(s.dataset);
  const SplitMasks masks = make_splits(g, 3, 3, SplitMode::kRandom, 0);
  const Subgraph all = subsample_nodes(g, 1.0, Mask(static_cast<std::size_t>(g.n_nodes()), false), 0);
  for (Method m : {Method::kGcn, Method::kGpnFoa}) {
    CHECK(run_inductive(m, g, masks, all, s.train).test_accuracy ==
          run_method(m, g, masks, s.train).test_accuracy);
  }
}

TEST_CASE("compare_methods") {
  ResultTable a, b;
  a.rows.push_back({"drop=0,nodes=1", "gpn-foa", 0, 1, 80.0, 3.0, 2, {77, 83}, {0, 0}});
  b.rows.push_back({"drop=0,nodes=1", "gcn", 0, 1, 75.0, 4.0, 2, {71, 79}, {0, 0}});
  const GapReport r = compare_methods(a, b);
  CHECK(r.method_a == "gpn-foa");
  CHECK(r.method_b == "gcn");
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].gap == 5.0);
  CHECK(r.rows[0].pooled_std == doctest::Approx(std::sqrt(12.5)));
  CHECK(to_json(r).at("rows")[0].at("gap") == 5.0);

  ResultTable c = b;
  c.rows[0].setting = "drop=0.5,nodes=1";
  CHECK_THROWS_AS(compare_methods(a, c), ConfigError);
  CHECK_THROWS_AS(compare_methods(a, ResultTable{}), ConfigError);
}

TEST_CASE("experiment spec JSON") {
  ExperimentSpec s = small_spec(Method::kGpnFda);
  s.drop_ratios = {0.0, 0.25};
  const Json j = to_json(s);
  const ExperimentSpec back = experiment_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.method == Method::kGpnFda);
  CHECK(back.dataset.sbm.feat_noise == 0.8);

  auto message = [](const Json& doc) {
    try {
      experiment_from_json(doc);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(Json::parse(R"({"dataset": {"sbm": {"blocks": 3}}})")).find("dataset.sbm.blocks") !=
        std::string::npos);
  CHECK(message(Json::parse(R"({"train": {"lr": 1}})")).find("train.lr") != std::string::npos);
  CHECK(message(Json::parse(R"({"method": "gat"})")).find("method") != std::string::npos);
  CHECK(message(Json::parse(R"({"drop_ratios": [1.5]})")).find("drop") != std::string::npos);
  CHECK(message(Json::parse(R"({"n_seeds": 0})")).find("n_seeds") != std::string::npos);
  CHECK(parse_method("gcn") == Method::kGcn);
  CHECK(method_name(Method::kGpnFoa) == "gpn-foa");
}

TEST_CASE("load_graph resolves dataset directories") {
  const fs::path root = fs::temp_directory_path() / "gpn_test_eval_root";
  fs::remove_all(root);
  const Graph g = gpn::testing::random_graph(3, 9, 3, 2);
  save_dataset(Graph::from_edges(g.features().cast<float>().cast<double>(), g.edge_list(), g.labels(), 2),
               root / "tiny", {"a", "b"});
  DatasetSpec spec;
  spec.name = "tiny";
  CHECK(load_graph(spec, root).n_nodes() == 9);
  spec.name = (root / "tiny").string();
  CHECK(load_graph(spec).n_nodes() == 9);
  spec.name = "absent";
  CHECK_THROWS(load_graph(spec, root));
}

TEST_CASE("CSV writers") {
  ResultTable t;
  t.config_hash = "00000000000000ab";
  t.rows.push_back({"drop=0.5,nodes=1", "gcn", 0.5, 1, 70.0, 2.0, 5, {}, {}});
  const fs::path dir = fs::temp_directory_path() / "gpn_test_eval_csv";
  fs::remove_all(dir);
  write_results_csv({t}, dir / "results.csv");
  write_plot_csv({t}, dir / "plot.csv", false);
  CHECK(read_file(dir / "results.csv") ==
        "setting,method,mean,std,seeds,config_hash\n\"drop=0.5,nodes=1\",gcn,70,2,5,00000000000000ab\n");
  CHECK(read_file(dir / "plot.csv") == "method,x,y,yerr\ngcn,0.5,70,2\n");
  write_plot_csv({t}, dir / "plot_nodes.csv", true);
  CHECK(read_file(dir / "plot_nodes.csv") == "method,x,y,yerr\ngcn,1,70,2\n");
}
