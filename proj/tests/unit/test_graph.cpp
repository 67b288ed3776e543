// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "gpn/errors.hpp"
#include "gpn/graph.hpp"
#include "test_util.hpp"

using namespace gpn;
using gpn::testing::max_abs_diff;

namespace {

std::set<std::pair<int, int>> edge_set(const Graph& g) {
  std::set<std::pair<int, int>> out;
  for (const auto& e : g.edge_list()) out.insert({e.u, e.v});
  return out;
}

bool is_symmetric_binary(const SparseMatrix& a) {
  const Matrix d = Matrix(a);
  return (d - d.transpose()).cwiseAbs().maxCoeff() == 0.0 &&
         ((d.array() == 0.0) || (d.array() == 1.0)).all() && d.diagonal().isZero(0.0);
}

}  // namespace

TEST_CASE("graph construction symmetrizes, dedupes and rejects self-loops") {
  const Matrix x = Matrix::Zero(4, 2);
  const Graph g = Graph::from_edges(x, {{0, 1}, {1, 0}, {2, 1}, {0, 1}}, {0, 1, 0, 1}, 2);
  CHECK(g.n_nodes() == 4);
  CHECK(g.n_edges() == 2);
  CHECK(is_symmetric_binary(g.adjacency()));
  CHECK(edge_set(g) == std::set<std::pair<int, int>>{{0, 1}, {1, 2}});
  CHECK_THROWS_AS(Graph::from_edges(x, {{2, 2}}, {0, 1, 0, 1}, 2), ConfigError);
  CHECK_THROWS(Graph::from_edges(x, {{0, 1}}, {0, 1, 0, 2}, 2));
  CHECK_THROWS(Graph::from_edges(x, {{0, 7}}, {0, 1, 0, 1}, 2));
}

TEST_CASE("normalize_adjacency examples") {
  const auto zero = normalize_adjacency(WeightedAdjacency(Matrix::Zero(2, 2), false));
  CHECK(zero.is_normalized());
  CHECK(max_abs_diff(zero.to_dense(), Matrix::Identity(2, 2)) == 0.0);

  Matrix pair(2, 2);
  pair << 0, 1, 1, 0;
  const auto half = normalize_adjacency(WeightedAdjacency(pair, false));
  CHECK(max_abs_diff(half.to_dense(), Matrix::Constant(2, 2, 0.5)) < 1e-15);

  Matrix r = gpn::testing::random_matrix(3, 8, 8).cwiseAbs();
  r = (r + r.transpose()).eval();
  r.diagonal().setZero();
  const auto s = normalize_adjacency(WeightedAdjacency(r, false));
  CHECK(max_abs_diff(s.to_dense(), gpn::testing::reference_normalize(r)) < 1e-12);

  CHECK_THROWS_AS(WeightedAdjacency(Matrix::Zero(2, 3), false), DimensionError);
}

TEST_CASE("normalize_adjacency keeps the storage kind and matches dense") {
  const Graph g = gpn::testing::random_graph(5, 12, 3, 2);
  const auto sparse = normalize_adjacency(WeightedAdjacency::from_graph(g));
  const auto dense = normalize_adjacency(WeightedAdjacency(Matrix(g.adjacency()), false));
  CHECK(sparse.is_sparse());
  CHECK_FALSE(dense.is_sparse());
  CHECK(max_abs_diff(sparse.to_dense(), dense.to_dense()) < 1e-15);
}

TEST_CASE("normalized binary adjacency: symmetric, entries in [0,1], positive diagonal") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = gpn::testing::random_graph(seed, 15, 2, 3, 0.3);
    const Matrix s = normalize_adjacency(WeightedAdjacency::from_graph(g)).to_dense();
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.minCoeff() >= 0.0);
    CHECK(s.maxCoeff() <= 1.0);
    CHECK((s.diagonal().array() > 0.0).all());
    CHECK((s.rowwise().sum().array() > 0.0).all());
    CHECK(s.allFinite());
  }
}

TEST_CASE("drop_edges") {
  SbmOptions o;
  o.seed = 3;
  const Graph g = generate_sbm(o);
  const int m = g.n_edges();

  const Graph same = drop_edges(g, 0.0, 1);
  CHECK(edge_set(same) == edge_set(g));
  CHECK(normalize_adjacency(WeightedAdjacency::from_graph(same)).to_dense() ==
        normalize_adjacency(WeightedAdjacency::from_graph(g)).to_dense());

  CHECK(drop_edges(g, 1.0, 1).n_edges() == 0);

  const Graph half = drop_edges(g, 0.5, 9);
  CHECK(half.n_edges() == m - static_cast<int>(std::floor(0.5 * m)));
  CHECK(is_symmetric_binary(half.adjacency()));
  const auto all = edge_set(g);
  for (const auto& e : edge_set(half)) CHECK(all.count(e) == 1);

  CHECK(edge_set(drop_edges(g, 0.3, 4)) == edge_set(drop_edges(g, 0.3, 4)));
  CHECK(edge_set(drop_edges(g, 0.3, 4)) != edge_set(drop_edges(g, 0.3, 5)));
  CHECK(drop_edges(g, 0.3, 4).features() == g.features());
  CHECK(drop_edges(g, 0.3, 4).labels() == g.labels());
  CHECK_THROWS_AS(drop_edges(g, 1.5, 0), ConfigError);
}

TEST_CASE("generate_sbm examples") {
  SbmOptions cliques{3, 2, 1.0, 0.0, 2, 0.0, 0};
  const Graph c = generate_sbm(cliques);
  CHECK(edge_set(c) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}});
  CHECK(c.labels() == std::vector<int>{0, 0, 0, 1, 1, 1});
  // feat_noise = 0: features are exactly the one-hot block centroid
  CHECK(c.features().row(0) == Eigen::RowVector2d(1, 0));
  CHECK(c.features().row(4) == Eigen::RowVector2d(0, 1));

  SbmOptions empty{3, 2, 0.0, 0.0, 2, 1.0, 0};
  CHECK(generate_sbm(empty).n_edges() == 0);

  SbmOptions bad;
  bad.feat_dim = 1;
  CHECK_THROWS_AS(generate_sbm(bad), ConfigError);
  SbmOptions inverted;
  inverted.p_in = 0.01;
  inverted.p_out = 0.1;
  CHECK_THROWS_AS(generate_sbm(inverted), ConfigError);
}

TEST_CASE("generate_sbm edge count within 3 sigma of the binomial mean") {
  // 2 * C(100,2) pairs at 0.1 plus 100*100 pairs at 0.01
  const double mean = 2 * 4950 * 0.1 + 10000 * 0.01;
  const double sd = std::sqrt(2 * 4950 * 0.1 * 0.9 + 10000 * 0.01 * 0.99);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SbmOptions o;
    o.seed = seed;
    const Graph g = generate_sbm(o);
    CHECK(g.n_nodes() == 200);
    CHECK(std::abs(g.n_edges() - mean) <= 3 * sd);
    CHECK(is_symmetric_binary(g.adjacency()));
  }
  SbmOptions o;
  CHECK(generate_sbm(o).features() == generate_sbm(o).features());
  CHECK(edge_set(generate_sbm(o)) == edge_set(generate_sbm(o)));
}

TEST_CASE("make_splits") {
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) labels.push_back(i < 10 ? 0 : 1);
  const Graph g = Graph::from_edges(Matrix::Zero(20, 2), {}, labels, 2);
  const SplitMasks s = make_splits(g, 2, 3, SplitMode::kRandom, 7);
  CHECK(mask_count(s.train) == 4);
  CHECK(mask_count(s.val) == 6);
  CHECK(mask_count(s.test) == 10);
  s.validate(20);
  for (int c = 0; c < 2; ++c) {
    int tr = 0, va = 0;
    for (int i = 0; i < 20; ++i) {
      if (labels[i] != c) continue;
      tr += s.train[i];
      va += s.val[i];
    }
    CHECK(tr == 2);
    CHECK(va == 3);
  }
  const SplitMasks again = make_splits(g, 2, 3, SplitMode::kRandom, 7);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  CHECK(make_splits(g, 2, 3, SplitMode::kRandom, 8).train != s.train);

  CHECK_THROWS_AS(make_splits(g, 6, 5, SplitMode::kRandom, 0), ConfigError);
  CHECK_THROWS_AS(make_splits(g, 2, 3, SplitMode::kFixed, 0), ConfigError);

  SplitMasks fixed{indices_to_mask({0, 10}, 20), indices_to_mask({1, 11}, 20),
                   indices_to_mask({2, 3, 12}, 20)};
  const Graph gf = Graph::from_edges(Matrix::Zero(20, 2), {}, labels, 2, fixed);
  const SplitMasks f = make_splits(gf, 2, 3, SplitMode::kFixed, 0);
  CHECK(f.train == fixed.train);
  CHECK(f.test == fixed.test);
}

TEST_CASE("SplitMasks::validate") {
  SplitMasks ok{indices_to_mask({0}, 3), indices_to_mask({1}, 3), indices_to_mask({2}, 3)};
  CHECK_NOTHROW(ok.validate(3));
  SplitMasks overlap{indices_to_mask({0}, 3), indices_to_mask({0, 1}, 3), indices_to_mask({2}, 3)};
  CHECK_THROWS_AS(overlap.validate(3), ConfigError);
  SplitMasks empty{indices_to_mask({0}, 3), indices_to_mask({1}, 3), Mask(3, false)};
  CHECK_THROWS_AS(empty.validate(3), ConfigError);
  CHECK_THROWS_AS(ok.validate(4), ConfigError);
}

TEST_CASE("induced_subgraph and subsample_nodes") {
  const Graph path = gpn::testing::path_graph(10);
  const Subgraph sub = induced_subgraph(path, {4, 0, 2, 1, 3, 2});
  CHECK(sub.graph.n_nodes() == 5);
  CHECK(sub.graph.n_edges() == 4);
  CHECK(sub.original_index == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(sub.graph.features() == path.features().topRows(5));

  const Subgraph all = subsample_nodes(path, 1.0, Mask(10, false), 0);
  CHECK(all.graph.n_nodes() == 10);
  CHECK(edge_set(all.graph) == edge_set(path));
  std::vector<int> identity(10);
  for (int i = 0; i < 10; ++i) identity[i] = i;
  CHECK(all.original_index == identity);

  SbmOptions o;
  const Graph g = generate_sbm(o);
  const SplitMasks s = make_splits(g, 20, 30, SplitMode::kRandom, 0);
  Mask required(200);
  for (int i = 0; i < 200; ++i) required[i] = s.train[i] || s.val[i];
  const Subgraph part = subsample_nodes(g, 0.6, required, 3);
  CHECK(part.graph.n_nodes() == 120);
  const Mask kept_train = restrict_mask(s.train, part.original_index);
  const Mask kept_val = restrict_mask(s.val, part.original_index);
  CHECK(mask_count(kept_train) == 40);
  CHECK(mask_count(kept_val) == 60);
  for (std::size_t i = 0; i < part.original_index.size(); ++i) {
    CHECK(part.graph.labels()[i] == g.labels()[part.original_index[i]]);
  }
  CHECK(subsample_nodes(g, 0.6, required, 3).original_index == part.original_index);
  CHECK_THROWS_AS(subsample_nodes(g, 0.3, required, 3), ConfigError);
}
