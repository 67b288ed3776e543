// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include "gpn/bilevel.hpp"
#include "gpn/diff.hpp"
#include "gpn/models.hpp"

namespace gpn {

namespace {

using diff::LossFn;
using diff::Tape;
using diff::Var;

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Graph random_graph(std::mt19937_64& rng, int n, int n_features, int n_classes) {
  std::bernoulli_distribution coin(0.4);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.push_back({i, j});
    }
  }
  std::uniform_int_distribution<int> label(0, n_classes - 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = label(rng);
  return Graph::from_edges(random_matrix(rng, n, n_features), edges, std::move(labels), n_classes);
}

// Contracts a matrix-valued Var with fixed random weights into a scalar.
Var contract(const Var& v, const Matrix& weights) {
  return diff::sum(diff::elementwise_mul(v, v.tape()->constant(weights)));
}

struct Check {
  std::string name;
  LossFn loss;
  std::vector<Matrix> leaves;
};

}  // namespace

GradCheckSuiteResult run_gradcheck_suite(int n_cases, std::uint64_t seed, double step) {
  std::map<std::string, GradCheckEntry> by_name;
  std::vector<std::string> order;

  for (int c = 0; c < n_cases; ++c) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const int n = std::uniform_int_distribution<int>(4, 10)(rng);
    const int f_dim = 3;
    const int k = 3;
    const Graph graph = random_graph(rng, n, f_dim, k);
    const WeightedAdjacency prior = normalize_adjacency(WeightedAdjacency::from_graph(graph));
    const WeightedAdjacency prior_dense(prior.to_dense(), true);
    SplitMasks masks{Mask(n, false), Mask(n, false), Mask(n, false)};
    for (int i = 0; i < n; ++i) (i % 2 == 0 ? masks.train : masks.val)[i] = true;

    const Matrix a = random_matrix(rng, n, f_dim);
    const Matrix b = random_matrix(rng, f_dim, 4);
    const Matrix sq = random_matrix(rng, n, n);
    const Matrix w_nk = random_matrix(rng, n, k);
    const Matrix w_n4 = random_matrix(rng, n, 4);
    const Matrix w_nf = random_matrix(rng, n, f_dim);
    const Matrix w_fn = random_matrix(rng, f_dim, n);
    const Matrix w_nn = random_matrix(rng, n, n);
    const Matrix positive = sq.cwiseAbs();
    // relu is not differentiable at 0; keep its inputs a safe distance away.
    const Matrix off_kink = sq + 0.1 * sq.cwiseSign();
    const auto dense_const = std::make_shared<const Matrix>(random_matrix(rng, n, n));
    const std::vector<int>& labels = graph.labels();

    std::vector<Check> checks;
    checks.push_back({"matmul",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::matmul(v[0], v[1]), w_n4); },
                      {a, b}});
    checks.push_back({"sparse_dense_matmul",
                      [&](Tape&, std::span<const Var> v) {
                        return contract(diff::sparse_dense_matmul(prior.sparse_handle(), v[0]), w_nf);
                      },
                      {a}});
    checks.push_back({"const_matmul",
                      [&](Tape&, std::span<const Var> v) {
                        return contract(diff::const_matmul(dense_const, v[0]), w_nf);
                      },
                      {a}});
    checks.push_back({"propagate",
                      [&](Tape&, std::span<const Var> v) {
                        return contract(diff::add(diff::propagate(prior, v[0]),
                                                  diff::propagate(prior_dense, v[0])),
                                        w_nf);
                      },
                      {a}});
    checks.push_back({"add",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::add(v[0], v[1]), w_nn); },
                      {sq, positive}});
    checks.push_back({"scale",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::scale(v[0], -1.7), w_nf); },
                      {a}});
    checks.push_back({"relu",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::relu(v[0]), w_nn); },
                      {off_kink}});
    checks.push_back({"transpose",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::transpose(v[0]), w_fn); },
                      {a}});
    checks.push_back({"row_softmax",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::row_softmax(v[0]), w_nf); },
                      {a}});
    checks.push_back({"exp",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::exp(v[0]), w_nf); },
                      {a}});
    checks.push_back({"elementwise_mul",
                      [&](Tape&, std::span<const Var> v) {
                        return contract(diff::elementwise_mul(v[0], v[1]), w_nn);
                      },
                      {sq, w_nn}});
    checks.push_back({"zero_diagonal",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::zero_diagonal(v[0]), w_nn); },
                      {sq}});
    checks.push_back({"masked_cross_entropy",
                      [&](Tape&, std::span<const Var> v) {
                        return diff::masked_cross_entropy(v[0], labels, masks.train);
                      },
                      {random_matrix(rng, n, k)}});
    checks.push_back({"frobenius_sq",
                      [&](Tape&, std::span<const Var> v) { return diff::frobenius_sq(v[0]); },
                      {a}});
    checks.push_back({"sum",
                      [&](Tape&, std::span<const Var> v) { return diff::sum(diff::exp(v[0])); },
                      {a}});
    checks.push_back({"gram",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::gram(v[0]), w_nn); },
                      {a}});
    checks.push_back({"cosine_gram",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::cosine_gram(v[0]), w_nn); },
                      {a}});
    checks.push_back({"neg_sq_euclid_gram",
                      [&](Tape&, std::span<const Var> v) {
                        return contract(diff::neg_sq_euclid_gram(v[0]), w_nn);
                      },
                      {a}});
    checks.push_back({"sym_normalize",
                      [&](Tape&, std::span<const Var> v) { return contract(diff::sym_normalize(v[0]), w_nn); },
                      {positive}});

    // Objectives: predictor 3 -> 5 -> k, generator head 3 -> 5 -> 4.
    const GcnParams pred = GcnParams::glorot({f_dim, 5, k}, rng());
    const GcnParams head = GcnParams::glorot({f_dim, 5, 4}, rng());
    std::vector<Matrix> pred_and_head = pred.layers;
    pred_and_head.insert(pred_and_head.end(), head.layers.begin(), head.layers.end());
    const std::size_t np = pred.layers.size();

    checks.push_back({"f(w; A)",
                      [&](Tape&, std::span<const Var> v) {
                        return lower_loss_f(v, graph, prior, masks.train);
                      },
                      pred.layers});

    const std::vector<std::pair<std::string, GeneratorParams>> variants = [&] {
      std::vector<std::pair<std::string, GeneratorParams>> out;
      for (Kernel kind : {Kernel::kDot, Kernel::kCosine, Kernel::kEuclidean}) {
        GeneratorParams gen;
        gen.heads = {head};
        gen.kernel = kind;
        out.emplace_back(kernel_name(kind), gen);
      }
      GeneratorParams topk;
      topk.heads = {head};
      topk.top_k = 2;
      out.emplace_back("dot,top_k=2", topk);
      return out;
    }();
    for (const auto& [label, gen] : variants) {
      checks.push_back({"f(w, theta; " + label + ")",
                        [&](Tape& tape, std::span<const Var> v) {
                          const Var x = tape.constant(graph.features());
                          const Var r = residual_on_tape(v.subspan(np), x, prior, gen);
                          return lower_loss_f(v.first(np), graph,
                                              normalized_combined_on_tape(graph, r), masks.train);
                        },
                        pred_and_head});
      checks.push_back({"F(w, theta; " + label + ")",
                        [&](Tape&, std::span<const Var> v) {
                          return upper_loss_F(v.first(np), v.subspan(np), gen, graph, prior,
                                              masks.val);
                        },
                        pred_and_head});
    }

    for (const auto& check : checks) {
      const auto result = diff::grad_check(check.loss, check.leaves, step);
      auto [it, inserted] = by_name.try_emplace(check.name, GradCheckEntry{check.name, 0.0, 0});
      if (inserted) order.push_back(check.name);
      it->second.max_rel_error = std::max(it->second.max_rel_error, result.max_rel_error);
      ++it->second.n_checks;
    }
  }

  GradCheckSuiteResult out;
  out.n_cases = n_cases;
  for (const auto& name : order) {
    out.entries.push_back(by_name[name]);
    out.max_rel_error = std::max(out.max_rel_error, by_name[name].max_rel_error);
  }
  return out;
}

}  // namespace gpn
