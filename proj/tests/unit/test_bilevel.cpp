// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "gpn/bilevel.hpp"
#include "gpn/errors.hpp"
#include "gpn/metrics.hpp"
#include "gpn/optim.hpp"
#include "test_util.hpp"

using namespace gpn;
using gpn::testing::max_abs_diff;

namespace {

double max_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, max_abs_diff(a[k], b[k]));
  return m;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs_pretrain = 3;
  c.epochs_main = 5;
  c.hidden = 6;
  c.gen_hidden = 6;
  c.gen_embed = 4;
  return c;
}

struct Fixture {
  Graph graph = gpn::testing::random_graph(21, 14, 4, 3, 0.3);
  SplitMasks masks = gpn::testing::alternating_masks(14);
  WeightedAdjacency prior = normalize_adjacency(WeightedAdjacency::from_graph(graph));
};

}  // namespace

TEST_CASE("lower_loss examples") {
  SUBCASE("zero predictor gives ln K") {
    const Fixture fx;
    PredictorParams pred{GcnParams::glorot({4, 6, 3}, 1, 0.0)};
    CHECK(lower_loss(pred, fx.graph, fx.prior, fx.masks.train) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-14));
  }
  SUBCASE("confident correct predictor gives about 0") {
    // no edges: the normalized adjacency is I and the logits are X W
    Matrix x = Matrix::Zero(4, 2);
    const std::vector<int> labels = {0, 1, 1, 0};
    for (int i = 0; i < 4; ++i) x(i, labels[i]) = 100.0;
    const Graph g = Graph::from_edges(x, {}, labels, 2);
    const auto s = normalize_adjacency(WeightedAdjacency::from_graph(g));
    PredictorParams pred;
    pred.gcn.layers = {Matrix::Identity(2, 2)};
    CHECK(lower_loss(pred, g, s, Mask(4, true)) < 1e-40);
  }
  SUBCASE("hand-computed two-node value") {
    Matrix x(2, 2);
    x << 1.0, 0.0, 0.0, 1.0;
    const Graph g = Graph::from_edges(x, {}, {0, 1}, 2);
    const auto s = normalize_adjacency(WeightedAdjacency::from_graph(g));
    PredictorParams pred;
    pred.gcn.layers = {(Matrix(2, 2) << 1.0, 2.0, 0.5, -1.0).finished()};
    const double expected = 0.5 * (std::log(std::exp(1.0) + std::exp(2.0)) - 1.0 +
                                   std::log(std::exp(0.5) + std::exp(-1.0)) + 1.0);
    CHECK(lower_loss(pred, g, s, Mask(2, true)) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("upper_loss with a zero residual equals the loss on the prior") {
  const Fixture fx;
  TrainConfig c = small_config();
  c.gen_output_scale = 0.0;
  const GpnModel m = init_model(fx.graph, c);
  CHECK(upper_loss(m.pred, m.gen, 0, fx.graph, fx.prior, fx.masks.val) ==
        doctest::Approx(lower_loss(m.pred, fx.graph, fx.prior, fx.masks.val)).epsilon(1e-13));
}

TEST_CASE("hypergradient: zero output layer gives a zero FOA gradient") {
  const Fixture fx;
  TrainConfig c = small_config();
  c.gen_output_scale = 0.0;
  const GpnModel m = init_model(fx.graph, c);
  const Hypergradient hg =
      hypergradient(Approx::kFoa, m.pred, m.gen, 0, fx.graph, fx.prior, fx.masks, 0.0, 0.01);
  REQUIRE(hg.grad.size() == m.gen.heads[0].layers.size());
  for (const auto& g : hg.grad) CHECK(g.isZero(0.0));
  CHECK(hg.term2_skipped);
}

TEST_CASE("hypergradient: FOA is the plain gradient of F, FDA at eta 0 equals FOA") {
  const Fixture fx;
  const GpnModel m = init_model(fx.graph, small_config());
  const Hypergradient foa =
      hypergradient(Approx::kFoa, m.pred, m.gen, 0, fx.graph, fx.prior, fx.masks, 0.0, 0.01);
  CHECK(foa.term2_skipped);
  CHECK(max_diff(foa.grad, foa.term1) == 0.0);
  for (const auto& t : foa.term2) CHECK(t.isZero(0.0));
  double norm = 0.0;
  for (const auto& g : foa.grad) norm += g.squaredNorm();
  CHECK(norm > 0.0);
  CHECK(foa.upper_loss ==
        doctest::Approx(upper_loss(m.pred, m.gen, 0, fx.graph, fx.prior, fx.masks.val)).epsilon(1e-13));

  const Hypergradient fda0 =
      hypergradient(Approx::kFda, m.pred, m.gen, 0, fx.graph, fx.prior, fx.masks, 0.0, 0.01);
  CHECK(max_diff(fda0.grad, foa.grad) < 1e-14);
  for (const auto& t : fda0.term2) CHECK(t.isZero(0.0));
}

TEST_CASE("hypergradient: FDA term2 matches its definition") {
  const Fixture fx;
  const GpnModel m = init_model(fx.graph, small_config());
  const double eta = 0.05;
  const Hypergradient fda =
      hypergradient(Approx::kFda, m.pred, m.gen, 0, fx.graph, fx.prior, fx.masks, eta, 0.01);
  REQUIRE_FALSE(fda.term2_skipped);
  CHECK(fda.epsilon > 0.0);
  CHECK(max_diff(fda.grad, [&] {
          std::vector<Matrix> d;
          for (std::size_t k = 0; k < fda.term1.size(); ++k) d.push_back(fda.term1[k] - fda.term2[k]);
          return d;
        }()) == 0.0);

  // Rebuild term2 from lower_grad_theta and an independent ∇_w' F.
  PredictorParams lookahead = m.pred;
  {
    diff::Tape tape;
    const auto w = as_vars(tape, m.pred.gcn, true);
    const auto th = as_vars(tape, m.gen.heads[0], false);
    const diff::Var x = tape.constant(fx.graph.features());
    const diff::Var r = residual_on_tape(th, x, fx.prior, m.gen);
    const diff::Var f = lower_loss_f(w, fx.graph, normalized_combined_on_tape(fx.graph, r), fx.masks.train);
    const auto g = tape.backward(f);
    for (std::size_t k = 0; k < w.size(); ++k) lookahead.gcn.layers[k] -= eta * g.wrt(w[k]);
  }
  std::vector<Matrix> dF;
  {
    diff::Tape tape;
    const auto w = as_vars(tape, lookahead.gcn, true);
    const auto th = as_vars(tape, m.gen.heads[0], false);
    const auto g = tape.backward(upper_loss_F(w, th, m.gen, fx.graph, fx.prior, fx.masks.val));
    for (const auto& v : w) dF.push_back(g.wrt(v));
  }
  double norm = 0.0;
  for (const auto& d : dF) norm += d.squaredNorm();
  const double eps = 0.01 / std::sqrt(norm);
  CHECK(fda.epsilon == doctest::Approx(eps).epsilon(1e-12));
  PredictorParams plus = m.pred, minus = m.pred;
  for (std::size_t k = 0; k < dF.size(); ++k) {
    plus.gcn.layers[k] += eps * dF[k];
    minus.gcn.layers[k] -= eps * dF[k];
  }
  const auto gp = lower_grad_theta(plus, m.gen, 0, fx.graph, fx.prior, fx.masks.train);
  const auto gm = lower_grad_theta(minus, m.gen, 0, fx.graph, fx.prior, fx.masks.train);
  std::vector<Matrix> expected;
  for (std::size_t k = 0; k < gp.size(); ++k) expected.push_back(eta * (gp[k] - gm[k]) / (2.0 * eps));
  CHECK(max_diff(fda.term2, expected) < 1e-10);
}

TEST_CASE("main epoch only touches the visited head") {
  const Fixture fx;
  TrainConfig c = small_config();
  c.heads = 3;
  GpnTrainer trainer(fx.graph, fx.masks, c);
  const GpnModel before = trainer.model();
  const EpochRecord rec = trainer.main_epoch(4);
  CHECK(rec.head == 1);
  CHECK(rec.step_losses.size() == 2);
  REQUIRE(rec.upper_loss.has_value());
  const GpnModel after = trainer.model();
  CHECK(max_diff(after.gen.heads[0].layers, before.gen.heads[0].layers) == 0.0);
  CHECK(max_diff(after.gen.heads[2].layers, before.gen.heads[2].layers) == 0.0);
  CHECK(max_diff(after.gen.heads[1].layers, before.gen.heads[1].layers) > 0.0);
  CHECK(max_diff(after.pred.gcn.layers, before.pred.gcn.layers) > 0.0);
}

TEST_CASE("train_gpn is deterministic and reports consistently") {
  const Fixture fx;
  for (Approx a : {Approx::kFoa, Approx::kFda}) {
    TrainConfig c = small_config();
    c.approx = a;
    c.heads = 2;
    const GpnResult r1 = train_gpn(fx.graph, fx.masks, c);
    const GpnResult r2 = train_gpn(fx.graph, fx.masks, c);
    CHECK(max_diff(r1.model.pred.gcn.layers, r2.model.pred.gcn.layers) == 0.0);
    CHECK(r1.report.test_accuracy == r2.report.test_accuracy);
    CHECK(r1.report.best_epoch == r2.report.best_epoch);
    CHECK(r1.report.epochs.size() == 8);
    CHECK(r1.report.epochs[0].phase == "pretrain");
    CHECK(r1.report.epochs[3].phase == "main");
    CHECK(r1.report.method == (a == Approx::kFoa ? "gpn-foa" : "gpn-fda"));
    CHECK(r1.report.head_val_accuracy.size() == 2);
    CHECK(r1.report.best_epoch >= 0);
    CHECK(r1.report.best_epoch <= 5);
    CHECK(r1.report.val_accuracy ==
          doctest::Approx(r1.report.head_val_accuracy[static_cast<std::size_t>(r1.report.selected_head)]));
  }
  TrainConfig other = small_config();
  other.seed = 9;
  CHECK(max_diff(train_gpn(fx.graph, fx.masks, other).model.pred.gcn.layers,
                 train_gpn(fx.graph, fx.masks, small_config()).model.pred.gcn.layers) > 0.0);
}

TEST_CASE("pretraining") {
  const Fixture fx;
  TrainConfig c = small_config();
  c.epochs_pretrain = 0;
  const GpnModel init = init_model(fx.graph, c);
  const GpnModel same = pretrain_nonbilevel(fx.graph, fx.masks, c);
  CHECK(max_diff(same.pred.gcn.layers, init.pred.gcn.layers) == 0.0);
  CHECK(max_diff(same.gen.heads[0].layers, init.gen.heads[0].layers) == 0.0);

  c.epochs_pretrain = 30;
  GpnTrainer trainer(fx.graph, fx.masks, c);
  std::vector<double> losses;
  for (int e = 0; e < 30; ++e) {
    const EpochRecord r = trainer.pretrain_epoch(e);
    CHECK(r.phase == "pretrain");
    losses.push_back(r.step_losses.at(0));
  }
  CHECK(losses.back() < losses.front());
  const GpnModel pre = pretrain_nonbilevel(fx.graph, fx.masks, c);
  CHECK(max_diff(pre.pred.gcn.layers, trainer.model().pred.gcn.layers) == 0.0);
  CHECK(max_diff(pre.gen.heads[0].layers, init.gen.heads[0].layers) > 0.0);
}

TEST_CASE("GCN baseline") {
  SbmOptions o{10, 2, 0.5, 0.02, 4, 0.1, 3};
  const Graph g = generate_sbm(o);
  const SplitMasks masks = make_splits(g, 3, 3, SplitMode::kRandom, 0);
  TrainConfig c = small_config();
  c.epochs_pretrain = 0;
  c.epochs_main = 0;
  const GcnResult none = train_gcn_baseline(g, masks, c);
  CHECK(none.report.epochs.empty());
  CHECK(none.report.best_epoch == 0);
  CHECK(max_diff(none.pred.gcn.layers, init_model(g, c).pred.gcn.layers) == 0.0);

  c.epochs_pretrain = 20;
  c.epochs_main = 80;
  c.lr_predictor = 0.05;
  const GcnResult r = train_gcn_baseline(g, masks, c);
  CHECK(r.report.method == "gcn");
  CHECK(r.report.epochs.size() == 100);
  CHECK(r.report.epochs.back().step_losses.at(0) < r.report.epochs.front().step_losses.at(0));
  CHECK(r.report.test_accuracy == 100.0);
  CHECK(train_gcn_baseline(g, masks, c, 2).report.epochs[0].step_losses.size() == 2);
  CHECK_THROWS_AS(train_gcn_baseline(g, masks, c, 0), ConfigError);
}

TEST_CASE("zero-residual GPN with val = train is two GCN steps per epoch") {
  const Fixture fx;
  SplitMasks masks = fx.masks;
  masks.val = masks.train;
  TrainConfig c = small_config();
  c.epochs_pretrain = 0;
  c.lr_generator = 0.0;
  c.gen_output_scale = 0.0;

  GpnTrainer trainer(fx.graph, masks, c);
  PredictorParams ref = init_model(fx.graph, c).pred;
  Adam opt({c.lr_predictor, c.weight_decay});
  for (int e = 0; e < 20; ++e) {
    trainer.main_epoch(e);
    for (int s = 0; s < 2; ++s) {
      diff::Tape tape;
      const auto w = as_vars(tape, ref.gcn, true);
      const auto g = tape.backward(lower_loss_f(w, fx.graph, fx.prior, masks.train));
      std::vector<Matrix> grads;
      for (const auto& v : w) grads.push_back(g.wrt(v));
      opt.step(ref.gcn.layers, grads);
    }
  }
  CHECK(max_diff(trainer.model().pred.gcn.layers, ref.gcn.layers) < 1e-10);
}

TEST_CASE("config validation and parsing") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.effective_eta() == c.lr_predictor);
  CHECK_FALSE(c.effective_top_k(100).has_value());
  CHECK(c.effective_top_k(6000) == 32);
  c.top_k = 0;
  CHECK_FALSE(c.effective_top_k(6000).has_value());
  c.top_k = 4;
  CHECK(c.effective_top_k(10) == 4);
  c.heads = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_approx(approx_name(Approx::kFda)) == Approx::kFda);
  CHECK_THROWS_AS(parse_approx("soa"), ConfigError);
}
