// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Joint structure/classifier training. The predictor (weights w) minimizes
// the training-set loss f on a graph; the generator (weights θ) minimizes the
// validation-set loss F of the predictor run on Â = A + g_θ(X, A). θ is
// updated with a one-step-lookahead hypergradient, either first-order (FOA)
// or with a finite-difference estimate of the mixed second-order term (FDA).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpn/diff.hpp"
#include "gpn/graph.hpp"
#include "gpn/models.hpp"
#include "gpn/optim.hpp"

namespace gpn {

enum class Approx { kFoa, kFda };

std::string approx_name(Approx a);
Approx parse_approx(const std::string& name);

struct TrainConfig {
  double lr_predictor = 0.005;
  double lr_generator = 0.005;
  double weight_decay = 0.005;
  std::optional<double> eta;  // lookahead step; defaults to lr_predictor
  int epochs_pretrain = 300;
  int epochs_main = 300;
  Approx approx = Approx::kFoa;
  double fda_epsilon_scale = 0.01;
  int heads = 1;
  std::uint64_t seed = 0;

  int hidden = 16;         // predictor hidden width
  int gen_hidden = 16;     // generator hidden width
  int gen_embed = 16;      // generator embedding width
  Kernel kernel = Kernel::kDot;
  int top_k = -1;          // -1: automatic (off up to 5000 nodes, else 32); 0: off
  bool residual_clamp = true;
  double gen_output_scale = 0.1;  // scale of the generator output layer at init

  void validate() const;
  double effective_eta() const { return eta.value_or(lr_predictor); }
  std::optional<int> effective_top_k(int n_nodes) const;
};

// ---- objectives -----------------------------------------------------------

// Mean cross-entropy of the predictor over `mask`, with a constant adjacency.
diff::Var lower_loss_f(std::span<const diff::Var> pred_w, const Graph& graph,
                       const WeightedAdjacency& norm_adj, const Mask& mask);
// Same, with a normalized adjacency recorded on the tape.
diff::Var lower_loss_f(std::span<const diff::Var> pred_w, const Graph& graph,
                       const diff::Var& norm_adj, const Mask& mask);

// Validation loss of the predictor on the structure produced by one head.
diff::Var upper_loss_F(std::span<const diff::Var> pred_w, std::span<const diff::Var> head_w,
                       const GeneratorParams& gen, const Graph& graph,
                       const WeightedAdjacency& prior_norm_adj, const Mask& val_mask);

double lower_loss(const PredictorParams& pred, const Graph& graph,
                  const WeightedAdjacency& norm_adj, const Mask& mask);
double upper_loss(const PredictorParams& pred, const GeneratorParams& gen, int head,
                  const Graph& graph, const WeightedAdjacency& prior_norm_adj,
                  const Mask& val_mask);

// ---- hypergradient --------------------------------------------------------

struct Hypergradient {
  std::vector<Matrix> grad;   // term1 - term2, one matrix per layer of the head
  std::vector<Matrix> term1;  // ∇_θ F(w', θ)
  std::vector<Matrix> term2;  // η (∇_θ f(w⁺) - ∇_θ f(w⁻)) / 2ε, zero for FOA
  double upper_loss = 0.0;    // F(w', θ)
  double epsilon = 0.0;       // 0 when term2 is skipped
  bool term2_skipped = true;
};

// FOA: ∇_θ F(w, θ). FDA: w' = w - η ∇_w f(w, Â), term1 = ∇_θ F(w', θ),
// ε = scale / ||∇_w' F||, w± = w ± ε ∇_w' F and
// term2 = η (∇_θ f(w⁺, Â) - ∇_θ f(w⁻, Â)) / 2ε. Only `head` is differentiated.
Hypergradient hypergradient(Approx approx, const PredictorParams& pred,
                            const GeneratorParams& gen, int head, const Graph& graph,
                            const WeightedAdjacency& prior_norm_adj, const SplitMasks& masks,
                            double eta, double epsilon_scale);

// ∇_θ f(w, X, Â(θ)) on the training mask for one head; used by FDA and tests.
std::vector<Matrix> lower_grad_theta(const PredictorParams& pred, const GeneratorParams& gen,
                                     int head, const Graph& graph,
                                     const WeightedAdjacency& prior_norm_adj,
                                     const Mask& train_mask);

// ---- reports --------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  std::string phase;                  // "pretrain" or "main"
  int head = 0;
  std::optional<double> upper_loss;   // F at the generator step, GPN main phase only
  std::vector<double> step_losses;    // training loss before each predictor step
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct RunReport {
  std::string method;
  TrainConfig config;
  int n_nodes = 0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0: state before the main loop
  int selected_head = 0;
  std::vector<double> head_val_accuracy;  // at best_epoch, one per head
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double wall_clock_seconds = 0.0;
};

// ---- training -------------------------------------------------------------

struct GpnModel {
  PredictorParams pred;
  GeneratorParams gen;
};

struct GpnResult {
  GpnModel model;
  RunReport report;
};

struct GcnResult {
  PredictorParams pred;
  RunReport report;
};

// Initial predictor and generator for `graph` (generator output layer scaled
// by config.gen_output_scale).
GpnModel init_model(const Graph& graph, const TrainConfig& config);

// Stateful driver of the alternating schedule; exposed so tests can step it.
class GpnTrainer {
 public:
  GpnTrainer(const Graph& graph, const SplitMasks& masks, const TrainConfig& config);
  GpnTrainer(const Graph& graph, const SplitMasks& masks, const TrainConfig& config,
             GpnModel initial);

  // One non-bilevel step: w and θ_head both follow ∇ f(w, X, Â) on train.
  EpochRecord pretrain_epoch(int epoch);
  // generator hypergradient step, predictor step on Â, predictor step on A.
  EpochRecord main_epoch(int epoch);

  // Normalized Â of one head under the current θ.
  const WeightedAdjacency& structure(int head);
  const WeightedAdjacency& prior_norm() const { return prior_norm_; }

  const GpnModel& model() const { return model_; }

  struct HeadScore {
    double val_accuracy = 0.0;
    double val_loss = 0.0;
    double train_accuracy = 0.0;
  };
  std::vector<HeadScore> score_heads();

 private:
  void predictor_step(const WeightedAdjacency& norm_adj, double* loss_before);

  const Graph& graph_;
  SplitMasks masks_;
  TrainConfig config_;
  WeightedAdjacency prior_norm_;
  GpnModel model_;
  Adam opt_pred_;
  std::vector<Adam> opt_heads_;
  std::vector<std::optional<WeightedAdjacency>> cache_;
};

GpnModel pretrain_nonbilevel(const Graph& graph, const SplitMasks& masks,
                             const TrainConfig& config);

GpnResult train_gpn(const Graph& graph, const SplitMasks& masks, const TrainConfig& config);

// Single-level predictor training on the prior graph for
// epochs_pretrain + epochs_main epochs with `steps_per_epoch` Adam steps each.
GcnResult train_gcn_baseline(const Graph& graph, const SplitMasks& masks,
                             const TrainConfig& config, int steps_per_epoch = 1);

// Inference adjacency of a trained model: the selected head's normalized Â.
WeightedAdjacency inference_structure(const GpnModel& model, int head, const Graph& graph);

}  // namespace gpn
