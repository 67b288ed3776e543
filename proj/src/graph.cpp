// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gpn/errors.hpp"

namespace gpn {

namespace {

SparseMatrix symmetric_binary(int n, const std::vector<Edge>& edges) {
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
      throw DimensionError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                           ") out of range for " + std::to_string(n) + " nodes");
    }
    if (e.u == e.v) {
      throw ConfigError("self-loop on node " + std::to_string(e.u));
    }
    triplets.emplace_back(e.u, e.v, 1.0);
    triplets.emplace_back(e.v, e.u, 1.0);
  }
  SparseMatrix adj(n, n);
  // duplicates collapse to 1
  adj.setFromTriplets(triplets.begin(), triplets.end(),
                      [](double, double) { return 1.0; });
  adj.makeCompressed();
  return adj;
}

// Guards against 0.3 * 10 == 2.9999999999999996 style truncation.
constexpr double kCountSlack = 1e-9;

}  // namespace

void SplitMasks::validate(int n_nodes) const {
  const auto n = static_cast<std::size_t>(n_nodes);
  if (train.size() != n || val.size() != n || test.size() != n) {
    throw ConfigError("split masks must have length " + std::to_string(n_nodes));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (int(train[i]) + int(val[i]) + int(test[i]) > 1) {
      throw ConfigError("split masks overlap at node " + std::to_string(i));
    }
  }
  if (mask_count(train) == 0) throw ConfigError("train mask is empty");
  if (mask_count(val) == 0) throw ConfigError("val mask is empty");
  if (mask_count(test) == 0) throw ConfigError("test mask is empty");
}

std::vector<int> mask_indices(const Mask& mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

Mask indices_to_mask(const std::vector<int>& indices, int n_nodes) {
  Mask mask(static_cast<std::size_t>(n_nodes), false);
  for (int i : indices) {
    if (i < 0 || i >= n_nodes) {
      throw DimensionError("mask index " + std::to_string(i) + " out of range");
    }
    mask[static_cast<std::size_t>(i)] = true;
  }
  return mask;
}

int mask_count(const Mask& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

Graph Graph::from_edges(Matrix features, const std::vector<Edge>& edges,
                        std::vector<int> labels, int n_classes,
                        std::optional<SplitMasks> fixed_split) {
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(labels.size()) != n) {
    throw DimensionError("labels length " + std::to_string(labels.size()) +
                         " != number of nodes " + std::to_string(n));
  }
  if (n_classes <= 0) throw ConfigError("n_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " at node " + std::to_string(i) +
                        " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
  if (fixed_split) fixed_split->validate(n);

  Graph g;
  g.adjacency_ = symmetric_binary(n, edges);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.n_classes_ = n_classes;
  g.fixed_split_ = std::move(fixed_split);
  return g;
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(n_edges()));
  for (int row = 0; row < adjacency_.outerSize(); ++row) {
    for (SparseMatrix::InnerIterator it(adjacency_, row); it; ++it) {
      if (it.col() > row) out.push_back({row, static_cast<int>(it.col())});
    }
  }
  return out;
}

WeightedAdjacency::WeightedAdjacency(Matrix dense, bool is_normalized)
    : normalized_(is_normalized) {
  if (dense.rows() != dense.cols()) {
    throw DimensionError("adjacency must be square, got " + std::to_string(dense.rows()) + "x" +
                         std::to_string(dense.cols()));
  }
  storage_ = std::make_shared<const Matrix>(std::move(dense));
}

WeightedAdjacency::WeightedAdjacency(SparseMatrix sparse, bool is_normalized)
    : normalized_(is_normalized) {
  if (sparse.rows() != sparse.cols()) {
    throw DimensionError("adjacency must be square, got " + std::to_string(sparse.rows()) + "x" +
                         std::to_string(sparse.cols()));
  }
  sparse.makeCompressed();
  storage_ = std::make_shared<const SparseMatrix>(std::move(sparse));
}

WeightedAdjacency WeightedAdjacency::from_graph(const Graph& graph) {
  return WeightedAdjacency(graph.adjacency(), false);
}

int WeightedAdjacency::size() const {
  if (is_sparse()) return static_cast<int>(sparse().rows());
  const auto& d = std::get<0>(storage_);
  return d ? static_cast<int>(d->rows()) : 0;
}

bool WeightedAdjacency::is_sparse() const { return storage_.index() == 1; }

const Matrix& WeightedAdjacency::dense() const {
  if (is_sparse()) throw ContractError("adjacency is stored sparse");
  return *std::get<0>(storage_);
}

const SparseMatrix& WeightedAdjacency::sparse() const {
  if (!is_sparse()) throw ContractError("adjacency is stored dense");
  return *std::get<1>(storage_);
}

Matrix WeightedAdjacency::to_dense() const {
  if (is_sparse()) return Matrix(sparse());
  return dense();
}

std::shared_ptr<const Matrix> WeightedAdjacency::dense_handle() const {
  if (is_sparse()) throw ContractError("adjacency is stored sparse");
  return std::get<0>(storage_);
}

std::shared_ptr<const SparseMatrix> WeightedAdjacency::sparse_handle() const {
  if (!is_sparse()) throw ContractError("adjacency is stored dense");
  return std::get<1>(storage_);
}

WeightedAdjacency normalize_adjacency(const WeightedAdjacency& adj) {
  const int n = adj.size();
  if (adj.is_sparse()) {
    const SparseMatrix& a = adj.sparse();
    Eigen::VectorXd degree = Eigen::VectorXd::Ones(n);
    for (int row = 0; row < n; ++row) {
      for (SparseMatrix::InnerIterator it(a, row); it; ++it) degree[row] += it.value();
    }
    if ((degree.array() <= 0.0).any()) {
      throw ConfigError("adjacency has a nonpositive degree; entries must be nonnegative");
    }
    const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(static_cast<std::size_t>(a.nonZeros() + n));
    for (int row = 0; row < n; ++row) {
      bool diagonal_seen = false;
      for (SparseMatrix::InnerIterator it(a, row); it; ++it) {
        const int col = static_cast<int>(it.col());
        double v = it.value();
        if (col == row) {
          v += 1.0;
          diagonal_seen = true;
        }
        triplets.emplace_back(row, col, v * inv_sqrt[row] * inv_sqrt[col]);
      }
      if (!diagonal_seen) triplets.emplace_back(row, row, inv_sqrt[row] * inv_sqrt[row]);
    }
    SparseMatrix out(n, n);
    out.setFromTriplets(triplets.begin(), triplets.end());
    return WeightedAdjacency(std::move(out), true);
  }

  const Matrix& a = adj.dense();
  Matrix tilde = a;
  tilde.diagonal().array() += 1.0;
  const Eigen::VectorXd degree = tilde.rowwise().sum();
  if ((degree.array() <= 0.0).any()) {
    throw ConfigError("adjacency has a nonpositive degree; entries must be nonnegative");
  }
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  Matrix out = inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
  return WeightedAdjacency(std::move(out), true);
}

Graph drop_edges(const Graph& graph, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("drop ratio must lie in [0, 1]");
  std::vector<Edge> edges = graph.edge_list();
  const auto n_drop = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(edges.size()) + kCountSlack));
  std::mt19937_64 rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng);
  edges.erase(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_drop));
  return Graph::from_edges(graph.features(), edges, graph.labels(), graph.n_classes(),
                           graph.fixed_split());
}

Graph generate_sbm(const SbmOptions& o) {
  if (o.n_per_block <= 0 || o.n_blocks <= 0) {
    throw ConfigError("sbm: n_per_block and n_blocks must be positive");
  }
  if (!(0.0 <= o.p_out && o.p_out <= o.p_in && o.p_in <= 1.0)) {
    throw ConfigError("sbm: require 0 <= p_out <= p_in <= 1");
  }
  if (o.feat_dim < o.n_blocks) throw ConfigError("sbm: feat_dim must be >= n_blocks");
  if (o.feat_noise < 0.0) throw ConfigError("sbm: feat_noise must be nonnegative");

  const int n = o.n_per_block * o.n_blocks;
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / o.n_per_block;

  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                           ? o.p_in
                           : o.p_out;
      if (unit(rng) < p) edges.push_back({i, j});
    }
  }

  Matrix features = Matrix::Zero(n, o.feat_dim);
  for (int i = 0; i < n; ++i) {
    features(i, labels[static_cast<std::size_t>(i)]) = 1.0;
    for (int f = 0; f < o.feat_dim; ++f) features(i, f) += o.feat_noise * noise(rng);
  }
  return Graph::from_edges(std::move(features), edges, std::move(labels), o.n_blocks);
}

SplitMasks make_splits(const Graph& graph, int per_class_train, int per_class_val,
                       SplitMode mode, std::uint64_t seed) {
  const int n = graph.n_nodes();
  if (mode == SplitMode::kFixed) {
    if (!graph.fixed_split()) throw ConfigError("graph has no fixed split");
    return *graph.fixed_split();
  }
  if (per_class_train <= 0 || per_class_val <= 0) {
    throw ConfigError("per-class train and val counts must be positive");
  }

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(graph.n_classes()));
  for (int i = 0; i < n; ++i) by_class[static_cast<std::size_t>(graph.labels()[i])].push_back(i);

  std::mt19937_64 rng(seed);
  SplitMasks masks{Mask(n, false), Mask(n, false), Mask(n, true)};
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& nodes = by_class[c];
    if (static_cast<int>(nodes.size()) < per_class_train + per_class_val) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(nodes.size()) +
                        " labeled nodes, need " + std::to_string(per_class_train + per_class_val));
    }
    std::shuffle(nodes.begin(), nodes.end(), rng);
    for (int k = 0; k < per_class_train + per_class_val; ++k) {
      const auto node = static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)]);
      (k < per_class_train ? masks.train : masks.val)[node] = true;
      masks.test[node] = false;
    }
  }
  masks.validate(n);
  return masks;
}

Subgraph induced_subgraph(const Graph& graph, std::vector<int> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const int n = graph.n_nodes();
  std::vector<int> local(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] < 0 || nodes[k] >= n) throw DimensionError("subgraph node out of range");
    local[static_cast<std::size_t>(nodes[k])] = static_cast<int>(k);
  }

  Matrix features(static_cast<Eigen::Index>(nodes.size()), graph.n_features());
  std::vector<int> labels(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    features.row(static_cast<Eigen::Index>(k)) = graph.features().row(nodes[k]);
    labels[k] = graph.labels()[static_cast<std::size_t>(nodes[k])];
  }
  std::vector<Edge> edges;
  for (const auto& e : graph.edge_list()) {
    const int u = local[static_cast<std::size_t>(e.u)];
    const int v = local[static_cast<std::size_t>(e.v)];
    if (u >= 0 && v >= 0) edges.push_back({u, v});
  }
  return {Graph::from_edges(std::move(features), edges, std::move(labels), graph.n_classes()),
          std::move(nodes)};
}

Mask restrict_mask(const Mask& mask, const std::vector<int>& original_index) {
  Mask out(original_index.size(), false);
  for (std::size_t k = 0; k < original_index.size(); ++k) {
    out[k] = mask.at(static_cast<std::size_t>(original_index[k]));
  }
  return out;
}

Subgraph subsample_nodes(const Graph& graph, double ratio, const Mask& required,
                         std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("node ratio must lie in (0, 1]");
  const int n = graph.n_nodes();
  if (static_cast<int>(required.size()) != n) throw DimensionError("required mask length != N");

  const auto target = static_cast<int>(std::ceil(ratio * n - kCountSlack));
  std::vector<int> keep = mask_indices(required);
  if (static_cast<int>(keep.size()) > target) {
    throw ConfigError("node ratio " + std::to_string(ratio) + " keeps " + std::to_string(target) +
                      " nodes but " + std::to_string(keep.size()) + " are required");
  }
  std::vector<int> optional;
  for (int i = 0; i < n; ++i) {
    if (!required[static_cast<std::size_t>(i)]) optional.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(optional.begin(), optional.end(), rng);
  keep.insert(keep.end(), optional.begin(),
              optional.begin() + (target - static_cast<int>(keep.size())));
  return induced_subgraph(graph, std::move(keep));
}

}  // namespace gpn
