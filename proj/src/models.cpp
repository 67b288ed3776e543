// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gpn/errors.hpp"

namespace gpn {

using diff::Tape;
using diff::Var;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GcnParams GcnParams::glorot(const std::vector<int>& dims, std::uint64_t seed,
                            double output_scale) {
  if (dims.size() < 2) throw ConfigError("a GCN needs at least one layer");
  std::mt19937_64 rng(seed);
  GcnParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] <= 0 || dims[l + 1] <= 0) throw ConfigError("layer widths must be positive");
    const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> unif(-limit, limit);
    Matrix w(dims[l], dims[l + 1]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = unif(rng);
    if (l + 2 == dims.size()) w *= output_scale;
    p.layers.push_back(std::move(w));
  }
  return p;
}

int GcnParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().rows());
}

int GcnParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().cols());
}

std::size_t GcnParams::n_params() const {
  std::size_t n = 0;
  for (const auto& w : layers) n += static_cast<std::size_t>(w.size());
  return n;
}

void GcnParams::validate() const {
  if (layers.empty()) throw ConfigError("GCN has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0 && layers[l - 1].cols() != layers[l].rows()) {
      throw DimensionError("layer " + std::to_string(l) + " expects " +
                           std::to_string(layers[l].rows()) + " inputs, previous layer gives " +
                           std::to_string(layers[l - 1].cols()));
    }
    if (!layers[l].allFinite()) throw ConfigError("layer " + std::to_string(l) + " is not finite");
  }
}

std::string kernel_name(Kernel kind) {
  switch (kind) {
    case Kernel::kDot: return "dot";
    case Kernel::kCosine: return "cosine";
    case Kernel::kEuclidean: return "euclidean";
  }
  return "dot";
}

Kernel parse_kernel(const std::string& name) {
  if (name == "dot") return Kernel::kDot;
  if (name == "cosine") return Kernel::kCosine;
  if (name == "euclidean") return Kernel::kEuclidean;
  throw ConfigError("unknown kernel '" + name + "' (expected dot, cosine or euclidean)");
}

void GeneratorParams::validate() const {
  if (heads.empty()) throw ConfigError("generator has no heads");
  for (const auto& h : heads) {
    h.validate();
    if (h.input_dim() != heads.front().input_dim()) {
      throw DimensionError("generator heads disagree on input dimension");
    }
  }
  if (top_k && *top_k <= 0) throw ConfigError("top_k must be positive");
}

GeneratorParams init_generator(int in_dim, int hidden_dim, int embed_dim,
                               std::span<const std::uint64_t> head_seeds, double output_scale,
                               Kernel kernel, std::optional<int> top_k, bool residual_clamp) {
  GeneratorParams gen;
  for (std::uint64_t s : head_seeds) {
    gen.heads.push_back(GcnParams::glorot({in_dim, hidden_dim, embed_dim}, s, output_scale));
  }
  gen.kernel = kernel;
  gen.top_k = top_k;
  gen.residual_clamp = residual_clamp;
  gen.validate();
  return gen;
}

std::vector<Var> as_vars(Tape& tape, const GcnParams& params, bool requires_grad) {
  std::vector<Var> out;
  out.reserve(params.layers.size());
  for (const auto& w : params.layers) out.push_back(tape.leaf(w, requires_grad));
  return out;
}

namespace {

template <typename Propagate>
Var gcn_stack(std::span<const Var> weights, const Var& features, Propagate&& propagate) {
  if (weights.empty()) throw ConfigError("GCN has no layers");
  if (features.cols() != weights.front().rows()) {
    throw DimensionError("features have " + std::to_string(features.cols()) +
                         " columns, first layer expects " + std::to_string(weights.front().rows()));
  }
  Var h = features;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = propagate(diff::matmul(h, weights[l]));
    if (l + 1 < weights.size()) h = diff::relu(h);
  }
  return h;
}

}  // namespace

Var gcn_forward(std::span<const Var> weights, const Var& features,
                const WeightedAdjacency& norm_adj) {
  if (!norm_adj.is_normalized()) throw ConfigError("gcn_forward expects a normalized adjacency");
  if (norm_adj.size() != features.rows()) {
    throw DimensionError("adjacency is " + std::to_string(norm_adj.size()) + "x" +
                         std::to_string(norm_adj.size()) + " but features have " +
                         std::to_string(features.rows()) + " rows");
  }
  return gcn_stack(weights, features, [&](const Var& x) { return diff::propagate(norm_adj, x); });
}

Var gcn_forward(std::span<const Var> weights, const Var& features, const Var& norm_adj) {
  return gcn_stack(weights, features, [&](const Var& x) { return diff::matmul(norm_adj, x); });
}

Var kernel_gram(const Var& h, Kernel kind) {
  switch (kind) {
    case Kernel::kDot: return diff::gram(h);
    case Kernel::kCosine: return diff::cosine_gram(h);
    case Kernel::kEuclidean: return diff::exp(diff::neg_sq_euclid_gram(h));
  }
  throw ConfigError("unknown kernel");
}

Matrix top_k_mask(const Matrix& r, int k) {
  if (k <= 0) throw ConfigError("top_k must be positive");
  const Eigen::Index n = r.rows();
  Matrix mask = Matrix::Zero(n, r.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r.cols()));
  const auto keep = std::min<Eigen::Index>(k, r.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        if (r(i, a) != r(i, b)) return r(i, a) > r(i, b);
                        return a < b;
                      });
    for (Eigen::Index c = 0; c < keep; ++c) mask(i, order[static_cast<std::size_t>(c)]) = 1.0;
  }
  return mask.cwiseMax(mask.transpose());
}

Var residual_on_tape(std::span<const Var> head_weights, const Var& features,
                     const WeightedAdjacency& prior_norm_adj, const GeneratorParams& gen) {
  const Var h = gcn_forward(head_weights, features, prior_norm_adj);
  Var r = kernel_gram(h, gen.kernel);
  if (gen.residual_clamp) r = diff::relu(r);
  r = diff::zero_diagonal(r);
  if (gen.top_k && *gen.top_k < r.cols()) {
    Tape& tape = *r.tape();
    r = diff::elementwise_mul(r, tape.constant(top_k_mask(r.value(), *gen.top_k)));
  }
  return r;
}

Var normalized_combined_on_tape(const Graph& graph, const Var& residual) {
  if (residual.rows() != graph.n_nodes() || residual.cols() != graph.n_nodes()) {
    throw DimensionError("residual shape does not match the graph");
  }
  Tape& tape = *residual.tape();
  const Var prior = tape.constant(Matrix(graph.adjacency()));
  return diff::sym_normalize(diff::add(prior, residual));
}

Matrix gcn_forward(const GcnParams& params, const Matrix& features,
                   const WeightedAdjacency& norm_adj) {
  Tape tape;
  const auto w = as_vars(tape, params, false);
  return gcn_forward(w, tape.constant(features), norm_adj).value();
}

Matrix predict(const PredictorParams& pred, const Graph& graph, const WeightedAdjacency& norm_adj) {
  if (pred.gcn.output_dim() != graph.n_classes()) {
    throw DimensionError("predictor outputs " + std::to_string(pred.gcn.output_dim()) +
                         " classes, graph has " + std::to_string(graph.n_classes()));
  }
  Tape tape;
  const auto w = as_vars(tape, pred.gcn, false);
  return diff::row_softmax(gcn_forward(w, tape.constant(graph.features()), norm_adj)).value();
}

Matrix kernel_gram(const Matrix& h, Kernel kind) {
  Tape tape;
  return kernel_gram(tape.constant(h), kind).value();
}

ResidualAdjacency generate_structure(const GeneratorParams& gen, int head, const Graph& graph,
                                     const WeightedAdjacency& prior_norm_adj) {
  if (head < 0 || head >= gen.n_heads()) {
    throw ConfigError("head " + std::to_string(head) + " out of range for " +
                      std::to_string(gen.n_heads()) + " heads");
  }
  Tape tape;
  const auto w = as_vars(tape, gen.heads[static_cast<std::size_t>(head)], false);
  Matrix residual =
      residual_on_tape(w, tape.constant(graph.features()), prior_norm_adj, gen).value();
  Matrix combined = Matrix(graph.adjacency()) + residual;
  return {std::move(residual), WeightedAdjacency(std::move(combined), false), head};
}

std::vector<ResidualAdjacency> multi_head_generate(const GeneratorParams& gen, const Graph& graph,
                                                   const WeightedAdjacency& prior_norm_adj) {
  std::vector<ResidualAdjacency> out;
  out.reserve(gen.heads.size());
  for (int h = 0; h < gen.n_heads(); ++h) {
    out.push_back(generate_structure(gen, h, graph, prior_norm_adj));
  }
  return out;
}

}  // namespace gpn
