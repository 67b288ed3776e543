// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Graph containers, adjacency normalization, corruption and data splits.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace gpn {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Mask = std::vector<bool>;

struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct SplitMasks {
  Mask train;
  Mask val;
  Mask test;

  // Throws ConfigError if masks overlap, are empty or have the wrong length.
  void validate(int n_nodes) const;
};

// Node indices selected by a mask, ascending.
std::vector<int> mask_indices(const Mask& mask);
Mask indices_to_mask(const std::vector<int>& indices, int n_nodes);
int mask_count(const Mask& mask);

// Undirected attributed graph with a binary symmetric adjacency (CSR, sorted
// columns, no self-loops). Immutable after construction.
class Graph {
 public:
  Graph() = default;

  // Edges may be given in either orientation and may contain duplicates;
  // they are symmetrized and deduplicated. Self-loops are rejected.
  static Graph from_edges(Matrix features, const std::vector<Edge>& edges,
                          std::vector<int> labels, int n_classes,
                          std::optional<SplitMasks> fixed_split = std::nullopt);

  int n_nodes() const { return static_cast<int>(features_.rows()); }
  int n_features() const { return static_cast<int>(features_.cols()); }
  int n_classes() const { return n_classes_; }
  // Number of undirected edges.
  int n_edges() const { return static_cast<int>(adjacency_.nonZeros() / 2); }

  const Matrix& features() const { return features_; }
  const SparseMatrix& adjacency() const { return adjacency_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::optional<SplitMasks>& fixed_split() const { return fixed_split_; }

  // Undirected edges with u < v, ordered by (u, v).
  std::vector<Edge> edge_list() const;

 private:
  Matrix features_;
  SparseMatrix adjacency_;
  std::vector<int> labels_;
  int n_classes_ = 0;
  std::optional<SplitMasks> fixed_split_;
};

// Real-valued, nonnegative N x N adjacency held either densely or in CSR form.
class WeightedAdjacency {
 public:
  WeightedAdjacency() = default;
  WeightedAdjacency(Matrix dense, bool is_normalized);
  WeightedAdjacency(SparseMatrix sparse, bool is_normalized);

  // Binary prior adjacency of a graph.
  static WeightedAdjacency from_graph(const Graph& graph);

  int size() const;
  bool is_normalized() const { return normalized_; }
  bool is_sparse() const;

  const Matrix& dense() const;          // requires !is_sparse()
  const SparseMatrix& sparse() const;   // requires is_sparse()
  Matrix to_dense() const;

  // Shared handles, used by the autodiff tape to avoid copies.
  std::shared_ptr<const Matrix> dense_handle() const;
  std::shared_ptr<const SparseMatrix> sparse_handle() const;

 private:
  std::variant<std::shared_ptr<const Matrix>, std::shared_ptr<const SparseMatrix>> storage_;
  bool normalized_ = false;
};

// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I. Keeps the storage kind.
WeightedAdjacency normalize_adjacency(const WeightedAdjacency& adj);

// Removes floor(ratio * M) undirected edges chosen uniformly at random.
Graph drop_edges(const Graph& graph, double ratio, std::uint64_t seed);

struct SbmOptions {
  int n_per_block = 100;
  int n_blocks = 2;
  double p_in = 0.1;
  double p_out = 0.01;
  int feat_dim = 8;
  double feat_noise = 1.0;
  std::uint64_t seed = 0;
};

// Stochastic block model; node i belongs to block i / n_per_block.
Graph generate_sbm(const SbmOptions& options);

enum class SplitMode { kFixed, kRandom };

// kFixed returns the split shipped with the graph; kRandom draws
// per_class_train / per_class_val nodes per class and puts the rest in test.
SplitMasks make_splits(const Graph& graph, int per_class_train, int per_class_val,
                       SplitMode mode, std::uint64_t seed);

struct Subgraph {
  Graph graph;
  std::vector<int> original_index;  // subgraph node -> node in the parent graph
};

// Induced subgraph on `nodes` (deduplicated and sorted). The fixed split is
// not carried over; use restrict_mask to map masks onto the subgraph.
Subgraph induced_subgraph(const Graph& graph, std::vector<int> nodes);

Mask restrict_mask(const Mask& mask, const std::vector<int>& original_index);

// Keeps ceil(ratio * N) nodes: every node in `required` plus a uniform random
// sample of the others.
Subgraph subsample_nodes(const Graph& graph, double ratio, const Mask& required,
                         std::uint64_t seed);

}  // namespace gpn
