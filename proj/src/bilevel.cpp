// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/bilevel.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "gpn/errors.hpp"
#include "gpn/metrics.hpp"

namespace gpn {

using diff::Tape;
using diff::Var;

std::string approx_name(Approx a) { return a == Approx::kFoa ? "foa" : "fda"; }

Approx parse_approx(const std::string& name) {
  if (name == "foa" || name == "FOA") return Approx::kFoa;
  if (name == "fda" || name == "FDA") return Approx::kFda;
  throw ConfigError("unknown approximation '" + name + "' (expected foa or fda)");
}

void TrainConfig::validate() const {
  if (!(lr_predictor > 0.0)) throw ConfigError("lr_predictor must be positive");
  if (!(lr_generator >= 0.0)) throw ConfigError("lr_generator must be nonnegative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (eta && !(*eta >= 0.0)) throw ConfigError("eta must be nonnegative");
  if (epochs_pretrain < 0 || epochs_main < 0) throw ConfigError("epochs must be >= 0");
  if (!(fda_epsilon_scale > 0.0)) throw ConfigError("fda_epsilon_scale must be positive");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (hidden < 1 || gen_hidden < 1 || gen_embed < 1) throw ConfigError("widths must be >= 1");
  if (top_k < -1) throw ConfigError("top_k must be -1 (auto), 0 (off) or positive");
  if (!(gen_output_scale >= 0.0)) throw ConfigError("gen_output_scale must be nonnegative");
}

std::optional<int> TrainConfig::effective_top_k(int n_nodes) const {
  if (top_k > 0) return top_k;
  if (top_k == -1 && n_nodes > 5000) return 32;
  return std::nullopt;
}

// ---- objectives -----------------------------------------------------------

Var lower_loss_f(std::span<const Var> pred_w, const Graph& graph,
                 const WeightedAdjacency& norm_adj, const Mask& mask) {
  Tape& tape = *pred_w.front().tape();
  const Var logits = gcn_forward(pred_w, tape.constant(graph.features()), norm_adj);
  return diff::masked_cross_entropy(logits, graph.labels(), mask);
}

Var lower_loss_f(std::span<const Var> pred_w, const Graph& graph, const Var& norm_adj,
                 const Mask& mask) {
  Tape& tape = *pred_w.front().tape();
  const Var logits = gcn_forward(pred_w, tape.constant(graph.features()), norm_adj);
  return diff::masked_cross_entropy(logits, graph.labels(), mask);
}

namespace {

Var generated_norm_adj(std::span<const Var> head_w, const GeneratorParams& gen,
                       const Graph& graph, const WeightedAdjacency& prior_norm_adj) {
  Tape& tape = *head_w.front().tape();
  const Var residual =
      residual_on_tape(head_w, tape.constant(graph.features()), prior_norm_adj, gen);
  return normalized_combined_on_tape(graph, residual);
}

void check_head(const GeneratorParams& gen, int head) {
  if (head < 0 || head >= gen.n_heads()) {
    throw ConfigError("head " + std::to_string(head) + " out of range for " +
                      std::to_string(gen.n_heads()) + " heads");
  }
}

std::vector<Matrix> grads_of(const diff::Gradients& g, const std::vector<Var>& vars) {
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(g.wrt(v));
  return out;
}

std::vector<Matrix> axpy(const std::vector<Matrix>& x, double a, const std::vector<Matrix>& y) {
  std::vector<Matrix> out;
  out.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out.push_back(x[k] + a * y[k]);
  return out;
}

}  // namespace

Var upper_loss_F(std::span<const Var> pred_w, std::span<const Var> head_w,
                 const GeneratorParams& gen, const Graph& graph,
                 const WeightedAdjacency& prior_norm_adj, const Mask& val_mask) {
  const Var adj = generated_norm_adj(head_w, gen, graph, prior_norm_adj);
  return lower_loss_f(pred_w, graph, adj, val_mask);
}

double lower_loss(const PredictorParams& pred, const Graph& graph,
                  const WeightedAdjacency& norm_adj, const Mask& mask) {
  Tape tape;
  const auto w = as_vars(tape, pred.gcn, false);
  return lower_loss_f(w, graph, norm_adj, mask).value()(0, 0);
}

double upper_loss(const PredictorParams& pred, const GeneratorParams& gen, int head,
                  const Graph& graph, const WeightedAdjacency& prior_norm_adj,
                  const Mask& val_mask) {
  check_head(gen, head);
  Tape tape;
  const auto w = as_vars(tape, pred.gcn, false);
  const auto th = as_vars(tape, gen.heads[static_cast<std::size_t>(head)], false);
  return upper_loss_F(w, th, gen, graph, prior_norm_adj, val_mask).value()(0, 0);
}

// ---- hypergradient --------------------------------------------------------

std::vector<Matrix> lower_grad_theta(const PredictorParams& pred, const GeneratorParams& gen,
                                     int head, const Graph& graph,
                                     const WeightedAdjacency& prior_norm_adj,
                                     const Mask& train_mask) {
  check_head(gen, head);
  Tape tape;
  const auto w = as_vars(tape, pred.gcn, false);
  const auto th = as_vars(tape, gen.heads[static_cast<std::size_t>(head)], true);
  const Var adj = generated_norm_adj(th, gen, graph, prior_norm_adj);
  const Var f = lower_loss_f(w, graph, adj, train_mask);
  return grads_of(tape.backward(f), th);
}

Hypergradient hypergradient(Approx approx, const PredictorParams& pred,
                            const GeneratorParams& gen, int head, const Graph& graph,
                            const WeightedAdjacency& prior_norm_adj, const SplitMasks& masks,
                            double eta, double epsilon_scale) {
  check_head(gen, head);
  const GcnParams& theta = gen.heads[static_cast<std::size_t>(head)];
  Hypergradient out;

  // Lookahead w' = w - η ∇_w f(w, X, Â); FOA takes η = 0 and keeps w.
  PredictorParams lookahead = pred;
  if (approx == Approx::kFda) {
    Tape tape;
    const auto w = as_vars(tape, pred.gcn, true);
    const auto th = as_vars(tape, theta, false);
    const Var adj = generated_norm_adj(th, gen, graph, prior_norm_adj);
    const Var f = lower_loss_f(w, graph, adj, masks.train);
    lookahead.gcn.layers = axpy(pred.gcn.layers, -eta, grads_of(tape.backward(f), w));
  }

  std::vector<Matrix> grad_w_prime;
  {
    Tape tape;
    const auto w = as_vars(tape, lookahead.gcn, approx == Approx::kFda);
    const auto th = as_vars(tape, theta, true);
    const Var F = upper_loss_F(w, th, gen, graph, prior_norm_adj, masks.val);
    const auto grads = tape.backward(F);
    out.upper_loss = F.value()(0, 0);
    out.term1 = grads_of(grads, th);
    if (approx == Approx::kFda) grad_w_prime = grads_of(grads, w);
  }

  out.term2.reserve(theta.layers.size());
  for (const auto& t : out.term1) out.term2.push_back(Matrix::Zero(t.rows(), t.cols()));

  if (approx == Approx::kFda) {
    double norm_sq = 0.0;
    for (const auto& g : grad_w_prime) norm_sq += g.squaredNorm();
    const double norm = std::sqrt(norm_sq);
    if (norm > 0.0) {
      out.epsilon = epsilon_scale / norm;
      out.term2_skipped = false;
      PredictorParams plus = pred;
      PredictorParams minus = pred;
      plus.gcn.layers = axpy(pred.gcn.layers, out.epsilon, grad_w_prime);
      minus.gcn.layers = axpy(pred.gcn.layers, -out.epsilon, grad_w_prime);
      const auto g_plus = lower_grad_theta(plus, gen, head, graph, prior_norm_adj, masks.train);
      const auto g_minus = lower_grad_theta(minus, gen, head, graph, prior_norm_adj, masks.train);
      for (std::size_t k = 0; k < out.term2.size(); ++k) {
        out.term2[k] = eta * (g_plus[k] - g_minus[k]) / (2.0 * out.epsilon);
      }
    }
  }

  out.grad.reserve(out.term1.size());
  for (std::size_t k = 0; k < out.term1.size(); ++k) out.grad.push_back(out.term1[k] - out.term2[k]);
  return out;
}

// ---- training -------------------------------------------------------------

GpnModel init_model(const Graph& graph, const TrainConfig& config) {
  config.validate();
  GpnModel m;
  m.pred.gcn = GcnParams::glorot({graph.n_features(), config.hidden, graph.n_classes()},
                                 derive_seed(config.seed, 1));
  std::vector<std::uint64_t> head_seeds;
  for (int h = 0; h < config.heads; ++h) {
    head_seeds.push_back(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(h)));
  }
  m.gen = init_generator(graph.n_features(), config.gen_hidden, config.gen_embed, head_seeds,
                         config.gen_output_scale, config.kernel,
                         config.effective_top_k(graph.n_nodes()), config.residual_clamp);
  return m;
}

namespace {

void check_masks(const Graph& graph, const SplitMasks& masks) {
  const auto n = static_cast<std::size_t>(graph.n_nodes());
  if (masks.train.size() != n || masks.val.size() != n || masks.test.size() != n) {
    throw DimensionError("split masks must have one entry per node");
  }
  if (mask_count(masks.train) == 0) throw ConfigError("train mask is empty");
  if (mask_count(masks.val) == 0) throw ConfigError("val mask is empty");
}

}  // namespace

GpnTrainer::GpnTrainer(const Graph& graph, const SplitMasks& masks, const TrainConfig& config)
    : GpnTrainer(graph, masks, config, init_model(graph, config)) {}

GpnTrainer::GpnTrainer(const Graph& graph, const SplitMasks& masks, const TrainConfig& config,
                       GpnModel initial)
    : graph_(graph),
      masks_(masks),
      config_(config),
      prior_norm_(normalize_adjacency(WeightedAdjacency::from_graph(graph))),
      model_(std::move(initial)),
      opt_pred_({config.lr_predictor, config.weight_decay}) {
  config_.validate();
  check_masks(graph, masks_);
  model_.pred.gcn.validate();
  model_.gen.validate();
  if (model_.pred.gcn.input_dim() != graph.n_features() ||
      model_.gen.heads.front().input_dim() != graph.n_features()) {
    throw DimensionError("model input width does not match the graph features");
  }
  for (int h = 0; h < model_.gen.n_heads(); ++h) {
    opt_heads_.emplace_back(AdamOptions{config.lr_generator, config.weight_decay});
  }
  cache_.resize(static_cast<std::size_t>(model_.gen.n_heads()));
}

const WeightedAdjacency& GpnTrainer::structure(int head) {
  auto& slot = cache_.at(static_cast<std::size_t>(head));
  if (!slot) slot = inference_structure(model_, head, graph_);
  return *slot;
}

void GpnTrainer::predictor_step(const WeightedAdjacency& norm_adj, double* loss_before) {
  Tape tape;
  const auto w = as_vars(tape, model_.pred.gcn, true);
  const Var f = lower_loss_f(w, graph_, norm_adj, masks_.train);
  const auto grads = grads_of(tape.backward(f), w);
  if (loss_before) *loss_before = f.value()(0, 0);
  opt_pred_.step(model_.pred.gcn.layers, grads);
}

std::vector<GpnTrainer::HeadScore> GpnTrainer::score_heads() {
  std::vector<HeadScore> scores;
  for (int h = 0; h < model_.gen.n_heads(); ++h) {
    const Matrix probs = predict(model_.pred, graph_, structure(h));
    scores.push_back({accuracy(probs, graph_.labels(), masks_.val),
                      cross_entropy(probs, graph_.labels(), masks_.val),
                      accuracy(probs, graph_.labels(), masks_.train)});
  }
  return scores;
}

EpochRecord GpnTrainer::pretrain_epoch(int epoch) {
  const int head = epoch % model_.gen.n_heads();
  auto& theta = model_.gen.heads[static_cast<std::size_t>(head)];

  Tape tape;
  const auto w = as_vars(tape, model_.pred.gcn, true);
  const auto th = as_vars(tape, theta, true);
  const Var adj = generated_norm_adj(th, model_.gen, graph_, prior_norm_);
  const Var f = lower_loss_f(w, graph_, adj, masks_.train);
  const auto grads = tape.backward(f);
  opt_pred_.step(model_.pred.gcn.layers, grads_of(grads, w));
  opt_heads_[static_cast<std::size_t>(head)].step(theta.layers, grads_of(grads, th));
  cache_[static_cast<std::size_t>(head)].reset();

  EpochRecord rec;
  rec.epoch = epoch + 1;
  rec.phase = "pretrain";
  rec.head = head;
  rec.step_losses = {f.value()(0, 0)};
  return rec;
}

EpochRecord GpnTrainer::main_epoch(int epoch) {
  const int head = epoch % model_.gen.n_heads();
  auto& theta = model_.gen.heads[static_cast<std::size_t>(head)];

  const double eta = config_.approx == Approx::kFoa ? 0.0 : config_.effective_eta();
  const Hypergradient hg = hypergradient(config_.approx, model_.pred, model_.gen, head, graph_,
                                         prior_norm_, masks_, eta, config_.fda_epsilon_scale);
  opt_heads_[static_cast<std::size_t>(head)].step(theta.layers, hg.grad);
  cache_[static_cast<std::size_t>(head)].reset();

  double loss_generated = 0.0;
  double loss_prior = 0.0;
  predictor_step(structure(head), &loss_generated);
  predictor_step(prior_norm_, &loss_prior);

  EpochRecord rec;
  rec.epoch = epoch + 1;
  rec.phase = "main";
  rec.head = head;
  rec.upper_loss = hg.upper_loss;
  rec.step_losses = {loss_generated, loss_prior};
  return rec;
}

WeightedAdjacency inference_structure(const GpnModel& model, int head, const Graph& graph) {
  const auto prior = normalize_adjacency(WeightedAdjacency::from_graph(graph));
  return normalize_adjacency(generate_structure(model.gen, head, graph, prior).combined);
}

GpnModel pretrain_nonbilevel(const Graph& graph, const SplitMasks& masks,
                             const TrainConfig& config) {
  GpnTrainer trainer(graph, masks, config);
  for (int e = 0; e < config.epochs_pretrain; ++e) trainer.pretrain_epoch(e);
  return trainer.model();
}

namespace {

struct Selection {
  int head = 0;
  double val_accuracy = -1.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
};

// Highest validation accuracy, then lowest validation loss, then lowest index.
Selection best_head(const std::vector<GpnTrainer::HeadScore>& scores) {
  Selection s;
  for (std::size_t h = 0; h < scores.size(); ++h) {
    const auto& c = scores[h];
    if (c.val_accuracy > s.val_accuracy ||
        (c.val_accuracy == s.val_accuracy && c.val_loss < s.val_loss)) {
      s = {static_cast<int>(h), c.val_accuracy, c.val_loss, c.train_accuracy};
    }
  }
  return s;
}

bool improves(const Selection& candidate, const Selection& incumbent) {
  return candidate.val_accuracy > incumbent.val_accuracy ||
         (candidate.val_accuracy == incumbent.val_accuracy &&
          candidate.val_loss < incumbent.val_loss);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

GpnResult train_gpn(const Graph& graph, const SplitMasks& masks, const TrainConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  GpnTrainer trainer(graph, masks, config);
  RunReport report;
  report.method = config.approx == Approx::kFoa ? "gpn-foa" : "gpn-fda";
  report.config = config;
  report.n_nodes = graph.n_nodes();

  for (int e = 0; e < config.epochs_pretrain; ++e) {
    EpochRecord rec = trainer.pretrain_epoch(e);
    const auto s = best_head(trainer.score_heads());
    rec.train_accuracy = s.train_accuracy;
    rec.val_accuracy = s.val_accuracy;
    rec.val_loss = s.val_loss;
    report.epochs.push_back(std::move(rec));
  }

  auto scores = trainer.score_heads();
  Selection best = best_head(scores);
  GpnModel best_model = trainer.model();
  std::vector<GpnTrainer::HeadScore> best_scores = scores;
  report.best_epoch = 0;

  for (int e = 0; e < config.epochs_main; ++e) {
    EpochRecord rec = trainer.main_epoch(e);
    scores = trainer.score_heads();
    const Selection s = best_head(scores);
    rec.train_accuracy = s.train_accuracy;
    rec.val_accuracy = s.val_accuracy;
    rec.val_loss = s.val_loss;
    report.epochs.push_back(std::move(rec));
    if (improves(s, best)) {
      best = s;
      best_model = trainer.model();
      best_scores = scores;
      report.best_epoch = e + 1;
    }
  }

  report.selected_head = best.head;
  for (const auto& s : best_scores) report.head_val_accuracy.push_back(s.val_accuracy);
  const Matrix probs =
      predict(best_model.pred, graph, inference_structure(best_model, best.head, graph));
  report.train_accuracy = accuracy(probs, graph.labels(), masks.train);
  report.val_accuracy = accuracy(probs, graph.labels(), masks.val);
  if (mask_count(masks.test) > 0) report.test_accuracy = accuracy(probs, graph.labels(), masks.test);
  report.wall_clock_seconds = seconds_since(start);
  return {std::move(best_model), std::move(report)};
}

GcnResult train_gcn_baseline(const Graph& graph, const SplitMasks& masks,
                             const TrainConfig& config, int steps_per_epoch) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  check_masks(graph, masks);
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");

  const auto prior = normalize_adjacency(WeightedAdjacency::from_graph(graph));
  PredictorParams pred = init_model(graph, config).pred;
  Adam opt({config.lr_predictor, config.weight_decay});

  auto evaluate = [&](const PredictorParams& p) {
    const Matrix probs = predict(p, graph, prior);
    return Selection{0, accuracy(probs, graph.labels(), masks.val),
                     cross_entropy(probs, graph.labels(), masks.val),
                     accuracy(probs, graph.labels(), masks.train)};
  };

  RunReport report;
  report.method = "gcn";
  report.config = config;
  report.n_nodes = graph.n_nodes();

  Selection best = evaluate(pred);
  PredictorParams best_pred = pred;
  report.best_epoch = 0;
  const int epochs = config.epochs_pretrain + config.epochs_main;
  for (int e = 0; e < epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.phase = "main";
    for (int s = 0; s < steps_per_epoch; ++s) {
      Tape tape;
      const auto w = as_vars(tape, pred.gcn, true);
      const Var f = lower_loss_f(w, graph, prior, masks.train);
      rec.step_losses.push_back(f.value()(0, 0));
      opt.step(pred.gcn.layers, grads_of(tape.backward(f), w));
    }
    const Selection s = evaluate(pred);
    rec.train_accuracy = s.train_accuracy;
    rec.val_accuracy = s.val_accuracy;
    rec.val_loss = s.val_loss;
    report.epochs.push_back(std::move(rec));
    if (improves(s, best)) {
      best = s;
      best_pred = pred;
      report.best_epoch = e + 1;
    }
  }

  report.selected_head = 0;
  report.head_val_accuracy = {best.val_accuracy};
  const Matrix probs = predict(best_pred, graph, prior);
  report.train_accuracy = accuracy(probs, graph.labels(), masks.train);
  report.val_accuracy = accuracy(probs, graph.labels(), masks.val);
  if (mask_count(masks.test) > 0) report.test_accuracy = accuracy(probs, graph.labels(), masks.test);
  report.wall_clock_seconds = seconds_since(start);
  return {std::move(best_pred), std::move(report)};
}

}  // namespace gpn
