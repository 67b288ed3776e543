// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// GCN stacks for the predictor and the structure generator.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpn/diff.hpp"
#include "gpn/graph.hpp"

namespace gpn {

// Stateless seed mixing (splitmix64) so every head/run gets its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Weights W^(l) of shape F_l x F_{l+1}; no biases.
struct GcnParams {
  std::vector<Matrix> layers;

  // Glorot-uniform layers for widths dims[0] -> dims[1] -> ...; the final
  // layer is multiplied by `output_scale` (0 gives an all-zero output layer).
  static GcnParams glorot(const std::vector<int>& dims, std::uint64_t seed,
                          double output_scale = 1.0);

  int input_dim() const;
  int output_dim() const;
  std::size_t n_params() const;
  // Throws DimensionError if layers do not chain or ConfigError if empty/non-finite.
  void validate() const;
};

struct PredictorParams {
  GcnParams gcn;
};

enum class Kernel { kDot, kCosine, kEuclidean };

std::string kernel_name(Kernel kind);
Kernel parse_kernel(const std::string& name);

struct GeneratorParams {
  std::vector<GcnParams> heads;
  Kernel kernel = Kernel::kDot;
  std::optional<int> top_k;
  bool residual_clamp = true;

  int n_heads() const { return static_cast<int>(heads.size()); }
  void validate() const;
};

// Heads are initialized independently from `head_seeds` (one per head).
GeneratorParams init_generator(int in_dim, int hidden_dim, int embed_dim,
                               std::span<const std::uint64_t> head_seeds, double output_scale,
                               Kernel kernel = Kernel::kDot, std::optional<int> top_k = {},
                               bool residual_clamp = true);

struct ResidualAdjacency {
  Matrix residual;               // g(X, A), N x N
  WeightedAdjacency combined;    // A + residual, dense, not normalized
  int head_index = 0;
};

// ---- differentiable building blocks ---------------------------------------

std::vector<diff::Var> as_vars(diff::Tape& tape, const GcnParams& params, bool requires_grad);

// H^(l+1) = σ(Â H^(l) W^(l)), ReLU between layers and identity after the last.
diff::Var gcn_forward(std::span<const diff::Var> weights, const diff::Var& features,
                      const WeightedAdjacency& norm_adj);
// Same with an adjacency that is itself on the tape.
diff::Var gcn_forward(std::span<const diff::Var> weights, const diff::Var& features,
                      const diff::Var& norm_adj);

diff::Var kernel_gram(const diff::Var& h, Kernel kind);

// Symmetric 0/1 mask keeping the k largest entries of each row of `r`
// (ties go to the lower column), united with its transpose.
Matrix top_k_mask(const Matrix& r, int k);

// Residual adjacency of one generator head: kernel of the head's embeddings
// on the fixed prior, clamped at zero, zero diagonal, optional top-k.
diff::Var residual_on_tape(std::span<const diff::Var> head_weights, const diff::Var& features,
                           const WeightedAdjacency& prior_norm_adj, const GeneratorParams& gen);

// sym_normalize(A + residual) with A the graph's binary adjacency.
diff::Var normalized_combined_on_tape(const Graph& graph, const diff::Var& residual);

// ---- plain evaluation -----------------------------------------------------

Matrix gcn_forward(const GcnParams& params, const Matrix& features,
                   const WeightedAdjacency& norm_adj);

// softmax(GCN_w(X, Â)), N x K.
Matrix predict(const PredictorParams& pred, const Graph& graph, const WeightedAdjacency& norm_adj);

Matrix kernel_gram(const Matrix& h, Kernel kind);

ResidualAdjacency generate_structure(const GeneratorParams& gen, int head, const Graph& graph,
                                     const WeightedAdjacency& prior_norm_adj);

std::vector<ResidualAdjacency> multi_head_generate(const GeneratorParams& gen, const Graph& graph,
                                                   const WeightedAdjacency& prior_norm_adj);

}  // namespace gpn
