// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation eagerly: forward values are computed when an
// op is called, and each node keeps a closure that maps the gradient of its
// output onto the gradients of its inputs. Nodes are appended in topological
// order, so backward() is a single sweep from the loss down to node 0.
//
//   Tape tape;
//   Var w = tape.leaf(W);
//   Var loss = frobenius_sq(matmul(tape.constant(X), w));
//   Gradients g = tape.backward(loss);
//   Matrix dw = g.wrt(w);
//
// A tape is single-threaded. Vars are lightweight handles and are only valid
// while their tape is alive.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "gpn/graph.hpp"

namespace gpn::diff {

using NodeId = int;

enum class OpKind {
  kLeaf,
  kMatmul,
  kSparseMatmul,
  kConstMatmul,
  kAdd,
  kScale,
  kRelu,
  kTranspose,
  kRowSoftmax,
  kMaskedCrossEntropy,
  kFrobeniusSq,
  kGram,
  kElementwiseMul,
  kCosineGram,
  kNegSqEuclidGram,
  kExp,
  kSum,
  kZeroDiagonal,
  kSymNormalize,
};

std::string_view op_name(OpKind kind);

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  NodeId id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = -1;
};

class Gradients {
 public:
  // Gradient with the shape of v's value; zero if v did not influence the loss.
  Matrix wrt(const Var& v) const;
  bool reached(const Var& v) const;

 private:
  friend class Tape;
  std::vector<Matrix> grads_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_;
};

// Accumulates vector-Jacobian products into the input nodes of one op.
class GradSink {
 public:
  void add(NodeId id, const Matrix& g);

 private:
  friend class Tape;
  GradSink(const Tape& tape, std::vector<Matrix>& grads) : tape_(tape), grads_(grads) {}
  const Tape& tape_;
  std::vector<Matrix>& grads_;
};

using BackwardFn = std::function<void(const Matrix& grad_out, GradSink& sink)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // Appends an op node. `backward` may be empty for ops without inputs that
  // require gradients.
  Var record(OpKind kind, std::vector<NodeId> inputs, Matrix value, BackwardFn backward);

  // Gradients of a 1x1 loss with respect to every node that requires grad.
  Gradients backward(const Var& loss) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const {
    return nodes_.at(static_cast<std::size_t>(id)).inputs;
  }
  const Matrix& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(NodeId id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Matrix value;
    bool requires_grad;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
// Constant sparse matrix times a Var.
Var sparse_dense_matmul(std::shared_ptr<const SparseMatrix> s, const Var& x);
// Constant dense matrix times a Var (shares the matrix instead of copying).
Var const_matmul(std::shared_ptr<const Matrix> c, const Var& x);
// Normalized adjacency times x, dispatching on storage kind.
Var propagate(const WeightedAdjacency& adj, const Var& x);

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var transpose(const Var& a);
Var row_softmax(const Var& a);
Var exp(const Var& a);
Var elementwise_mul(const Var& a, const Var& b);
Var zero_diagonal(const Var& a);

// Mean over masked rows of -log softmax(logits)_i[label_i]. Returns 1x1.
Var masked_cross_entropy(const Var& logits, std::span<const int> labels, const Mask& mask);
Var frobenius_sq(const Var& a);
Var sum(const Var& a);

// H Hᵀ
Var gram(const Var& h);
// Gram matrix of unit-normalized rows; all-zero rows have similarity 0 to every row.
Var cosine_gram(const Var& h);
// -||h_i - h_j||²
Var neg_sq_euclid_gram(const Var& h);

// D^-1/2 (X + I) D^-1/2 with D = rowsum(X + I). Throws ConfigError if a degree is <= 0.
Var sym_normalize(const Var& adj);

// ---- finite-difference checking -------------------------------------------

using LossFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_leaf;
};

// Entrywise |analytic - numeric| / max(|analytic|, |numeric|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-4;

// Compares backward() against central differences of `loss` with respect to
// each leaf, perturbing one entry at a time.
GradCheckResult grad_check(const LossFn& loss, const std::vector<Matrix>& leaves,
                           double step = 1e-5);

}  // namespace gpn::diff
