// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "gpn/errors.hpp"

namespace gpn::diff {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw ContractError("use of an uninitialized Var");
  return *v.tape();
}

Tape& common_tape(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (&t != &tape_of(b)) throw ContractError("operands recorded on different tapes");
  return t;
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

void require_square(const char* op, const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(op) + ": expected a square matrix, got " + shape(a));
  }
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kSparseMatmul: return "sparse_dense_matmul";
    case OpKind::kConstMatmul: return "const_matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kRowSoftmax: return "row_softmax";
    case OpKind::kMaskedCrossEntropy: return "masked_cross_entropy";
    case OpKind::kFrobeniusSq: return "frobenius_sq";
    case OpKind::kGram: return "gram";
    case OpKind::kElementwiseMul: return "elementwise_mul";
    case OpKind::kCosineGram: return "cosine_gram";
    case OpKind::kNegSqEuclidGram: return "neg_sq_euclid_gram";
    case OpKind::kExp: return "exp";
    case OpKind::kSum: return "sum";
    case OpKind::kZeroDiagonal: return "zero_diagonal";
    case OpKind::kSymNormalize: return "sym_normalize";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape_of(*this).value(id_); }

bool Var::requires_grad() const { return tape_of(*this).requires_grad(id_); }

Matrix Gradients::wrt(const Var& v) const {
  const auto id = static_cast<std::size_t>(v.id());
  if (id < grads_.size() && grads_[id].size() > 0) return grads_[id];
  return Matrix::Zero(v.rows(), v.cols());
}

bool Gradients::reached(const Var& v) const {
  const auto id = static_cast<std::size_t>(v.id());
  return id < grads_.size() && grads_[id].size() > 0;
}

void GradSink::add(NodeId id, const Matrix& g) {
  if (!tape_.requires_grad(id)) return;
  auto& slot = grads_[static_cast<std::size_t>(id)];
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  nodes_.push_back({OpKind::kLeaf, {}, std::move(value), requires_grad, nullptr});
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Tape::record(OpKind kind, std::vector<NodeId> inputs, Matrix value, BackwardFn backward) {
  bool needs_grad = false;
  for (NodeId in : inputs) needs_grad = needs_grad || requires_grad(in);
  if (!needs_grad) backward = nullptr;
  nodes_.push_back({kind, std::move(inputs), std::move(value), needs_grad, std::move(backward)});
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ContractError("loss was not recorded on this tape");
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward requires a scalar loss, got " + shape(lv));
  }
  Gradients out;
  out.grads_.resize(nodes_.size());
  out.grads_[static_cast<std::size_t>(loss.id())] = Matrix::Ones(1, 1);
  GradSink sink(*this, out.grads_);
  for (NodeId id = loss.id(); id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Matrix& g = out.grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0 || !node.backward) continue;
    node.backward(g, sink);
  }
  // Only leaves that requested gradients keep them.
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind != OpKind::kLeaf || !nodes_[id].requires_grad) out.grads_[id].resize(0, 0);
  }
  return out;
}

// ---- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape(av) + " * " + shape(bv));
  }
  const NodeId ia = a.id(), ib = b.id();
  return t.record(OpKind::kMatmul, {ia, ib}, av * bv,
                  [&t, ia, ib](const Matrix& g, GradSink& sink) {
                    if (t.requires_grad(ia)) sink.add(ia, g * t.value(ib).transpose());
                    if (t.requires_grad(ib)) sink.add(ib, t.value(ia).transpose() * g);
                  });
}

Var sparse_dense_matmul(std::shared_ptr<const SparseMatrix> s, const Var& x) {
  Tape& t = tape_of(x);
  if (s->cols() != x.rows()) {
    throw DimensionError("sparse_dense_matmul: " + std::to_string(s->rows()) + "x" +
                         std::to_string(s->cols()) + " * " + shape(x.value()));
  }
  const NodeId ix = x.id();
  Matrix value = (*s) * x.value();
  return t.record(OpKind::kSparseMatmul, {ix}, std::move(value),
                  [s, ix](const Matrix& g, GradSink& sink) {
                    sink.add(ix, s->transpose() * g);
                  });
}

Var const_matmul(std::shared_ptr<const Matrix> c, const Var& x) {
  Tape& t = tape_of(x);
  if (c->cols() != x.rows()) {
    throw DimensionError("const_matmul: " + shape(*c) + " * " + shape(x.value()));
  }
  const NodeId ix = x.id();
  Matrix value = (*c) * x.value();
  return t.record(OpKind::kConstMatmul, {ix}, std::move(value),
                  [c, ix](const Matrix& g, GradSink& sink) {
                    sink.add(ix, c->transpose() * g);
                  });
}

Var propagate(const WeightedAdjacency& adj, const Var& x) {
  if (adj.is_sparse()) return sparse_dense_matmul(adj.sparse_handle(), x);
  return const_matmul(adj.dense_handle(), x);
}

Var add(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  const NodeId ia = a.id(), ib = b.id();
  return t.record(OpKind::kAdd, {ia, ib}, a.value() + b.value(),
                  [ia, ib](const Matrix& g, GradSink& sink) {
                    sink.add(ia, g);
                    sink.add(ib, g);
                  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  return t.record(OpKind::kScale, {ia}, a.value() * s,
                  [ia, s](const Matrix& g, GradSink& sink) { sink.add(ia, g * s); });
}

Var relu(const Var& a) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  return t.record(OpKind::kRelu, {ia}, a.value().cwiseMax(0.0),
                  [&t, ia](const Matrix& g, GradSink& sink) {
                    sink.add(ia, (t.value(ia).array() > 0.0).select(g, 0.0));
                  });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  return t.record(OpKind::kTranspose, {ia}, a.value().transpose(),
                  [ia](const Matrix& g, GradSink& sink) { sink.add(ia, g.transpose()); });
}

Var row_softmax(const Var& a) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  Matrix y = softmax_rows(a.value());
  auto y_shared = std::make_shared<const Matrix>(y);
  return t.record(OpKind::kRowSoftmax, {ia}, std::move(y),
                  [y_shared, ia](const Matrix& g, GradSink& sink) {
                    const Matrix& y = *y_shared;
                    const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
                    sink.add(ia, (y.array() * (g.colwise() - dot).array()).matrix());
                  });
}

Var exp(const Var& a) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  Matrix y = a.value().array().exp().matrix();
  const NodeId out = static_cast<NodeId>(t.size());
  return t.record(OpKind::kExp, {ia}, std::move(y),
                  [&t, ia, out](const Matrix& g, GradSink& sink) {
                    sink.add(ia, g.cwiseProduct(t.value(out)));
                  });
}

Var elementwise_mul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape("elementwise_mul", a.value(), b.value());
  const NodeId ia = a.id(), ib = b.id();
  return t.record(OpKind::kElementwiseMul, {ia, ib}, a.value().cwiseProduct(b.value()),
                  [&t, ia, ib](const Matrix& g, GradSink& sink) {
                    if (t.requires_grad(ia)) sink.add(ia, g.cwiseProduct(t.value(ib)));
                    if (t.requires_grad(ib)) sink.add(ib, g.cwiseProduct(t.value(ia)));
                  });
}

Var zero_diagonal(const Var& a) {
  Tape& t = tape_of(a);
  require_square("zero_diagonal", a.value());
  const NodeId ia = a.id();
  Matrix y = a.value();
  y.diagonal().setZero();
  return t.record(OpKind::kZeroDiagonal, {ia}, std::move(y),
                  [ia](const Matrix& g, GradSink& sink) {
                    Matrix d = g;
                    d.diagonal().setZero();
                    sink.add(ia, d);
                  });
}

Var masked_cross_entropy(const Var& logits, std::span<const int> labels, const Mask& mask) {
  Tape& t = tape_of(logits);
  const Matrix& x = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != x.rows() ||
      static_cast<Eigen::Index>(mask.size()) != x.rows()) {
    throw DimensionError("masked_cross_entropy: logits " + shape(x) + ", labels " +
                         std::to_string(labels.size()) + ", mask " + std::to_string(mask.size()));
  }
  auto rows = std::make_shared<std::vector<int>>(mask_indices(mask));
  if (rows->empty()) throw ConfigError("masked_cross_entropy: mask selects no nodes");
  auto targets = std::make_shared<std::vector<int>>();
  for (int r : *rows) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= x.cols()) {
      throw DimensionError("masked_cross_entropy: label " + std::to_string(y) + " at row " +
                           std::to_string(r) + " outside [0, " + std::to_string(x.cols()) + ")");
    }
    targets->push_back(y);
  }

  const double inv_m = 1.0 / static_cast<double>(rows->size());
  double loss = 0.0;
  for (std::size_t k = 0; k < rows->size(); ++k) {
    const auto row = x.row((*rows)[k]);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    loss += lse - row((*targets)[k]);
  }
  loss *= inv_m;

  const NodeId ix = logits.id();
  return t.record(OpKind::kMaskedCrossEntropy, {ix}, Matrix::Constant(1, 1, loss),
                  [&t, ix, rows, targets, inv_m](const Matrix& g, GradSink& sink) {
                    const Matrix& x = t.value(ix);
                    Matrix d = Matrix::Zero(x.rows(), x.cols());
                    const double scale = g(0, 0) * inv_m;
                    for (std::size_t k = 0; k < rows->size(); ++k) {
                      const int r = (*rows)[k];
                      const double m = x.row(r).maxCoeff();
                      Eigen::RowVectorXd p = (x.row(r).array() - m).exp();
                      p /= p.sum();
                      p((*targets)[k]) -= 1.0;
                      d.row(r) = scale * p;
                    }
                    sink.add(ix, d);
                  });
}

Var frobenius_sq(const Var& a) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  return t.record(OpKind::kFrobeniusSq, {ia}, Matrix::Constant(1, 1, a.value().squaredNorm()),
                  [&t, ia](const Matrix& g, GradSink& sink) {
                    sink.add(ia, 2.0 * g(0, 0) * t.value(ia));
                  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  const NodeId ia = a.id();
  return t.record(OpKind::kSum, {ia}, Matrix::Constant(1, 1, a.value().sum()),
                  [&t, ia](const Matrix& g, GradSink& sink) {
                    const Matrix& x = t.value(ia);
                    sink.add(ia, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
                  });
}

Var gram(const Var& h) {
  Tape& t = tape_of(h);
  const NodeId ih = h.id();
  Matrix y = h.value() * h.value().transpose();
  return t.record(OpKind::kGram, {ih}, std::move(y),
                  [&t, ih](const Matrix& g, GradSink& sink) {
                    sink.add(ih, (g + g.transpose()) * t.value(ih));
                  });
}

Var cosine_gram(const Var& h) {
  Tape& t = tape_of(h);
  const Matrix& hv = h.value();
  auto norms = std::make_shared<Eigen::VectorXd>(hv.rowwise().norm());
  auto unit = std::make_shared<Matrix>(hv);
  for (Eigen::Index i = 0; i < hv.rows(); ++i) {
    if ((*norms)[i] > 0.0) {
      unit->row(i) /= (*norms)[i];
    } else {
      unit->row(i).setZero();
    }
  }
  Matrix y = (*unit) * unit->transpose();
  const NodeId ih = h.id();
  return t.record(OpKind::kCosineGram, {ih}, std::move(y),
                  [ih, norms, unit](const Matrix& g, GradSink& sink) {
                    const Matrix& u = *unit;
                    Matrix du = (g + g.transpose()) * u;
                    Matrix dh(u.rows(), u.cols());
                    for (Eigen::Index i = 0; i < u.rows(); ++i) {
                      if ((*norms)[i] > 0.0) {
                        dh.row(i) = (du.row(i) - du.row(i).dot(u.row(i)) * u.row(i)) / (*norms)[i];
                      } else {
                        dh.row(i).setZero();
                      }
                    }
                    sink.add(ih, dh);
                  });
}

Var neg_sq_euclid_gram(const Var& h) {
  Tape& t = tape_of(h);
  const Matrix& hv = h.value();
  const Eigen::VectorXd sq = hv.rowwise().squaredNorm();
  Matrix y = 2.0 * hv * hv.transpose();
  y.colwise() -= sq;
  y.rowwise() -= sq.transpose();
  // Exact zeros on the diagonal regardless of rounding.
  y.diagonal().setZero();
  const NodeId ih = h.id();
  return t.record(OpKind::kNegSqEuclidGram, {ih}, std::move(y),
                  [&t, ih](const Matrix& g, GradSink& sink) {
                    const Matrix& hv = t.value(ih);
                    const Matrix gs = g + g.transpose();
                    const Eigen::VectorXd weight = gs.rowwise().sum();
                    Matrix dh = 2.0 * (gs * hv);
                    dh -= 2.0 * (weight.asDiagonal() * hv);
                    sink.add(ih, dh);
                  });
}

Var sym_normalize(const Var& adj) {
  Tape& t = tape_of(adj);
  require_square("sym_normalize", adj.value());
  Matrix tilde = adj.value();
  tilde.diagonal().array() += 1.0;
  const Eigen::VectorXd degree = tilde.rowwise().sum();
  if ((degree.array() <= 0.0).any()) {
    throw ConfigError("sym_normalize: nonpositive degree; adjacency must be nonnegative");
  }
  auto inv_sqrt = std::make_shared<Eigen::VectorXd>(degree.cwiseSqrt().cwiseInverse());
  auto inv_deg = std::make_shared<Eigen::VectorXd>(degree.cwiseInverse());
  Matrix s = inv_sqrt->asDiagonal() * tilde * inv_sqrt->asDiagonal();
  const NodeId ia = adj.id();
  const NodeId out = static_cast<NodeId>(t.size());
  return t.record(
      OpKind::kSymNormalize, {ia}, std::move(s),
      [&t, ia, out, inv_sqrt, inv_deg](const Matrix& g, GradSink& sink) {
        const Matrix& s = t.value(out);
        // S_ij = Ã_ij d_i^-1/2 d_j^-1/2 and d_k = Σ_l Ã_kl.
        const Matrix gs = g.cwiseProduct(s);
        const Eigen::VectorXd through_degree =
            -0.5 * inv_deg->cwiseProduct(gs.rowwise().sum() + gs.colwise().sum().transpose());
        Matrix d = inv_sqrt->asDiagonal() * g * inv_sqrt->asDiagonal();
        d.colwise() += through_degree;
        sink.add(ia, d);
      });
}

// ---- finite-difference checking -------------------------------------------

GradCheckResult grad_check(const LossFn& loss, const std::vector<Matrix>& leaves, double step) {
  auto evaluate = [&](const std::vector<Matrix>& values) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const auto& v : values) vars.push_back(tape.leaf(v));
    const Var l = loss(tape, vars);
    return l.value()(0, 0);
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& v : leaves) vars.push_back(tape.leaf(v));
  const Var l = loss(tape, vars);
  const Gradients grads = tape.backward(l);

  GradCheckResult result;
  std::vector<Matrix> probe = leaves;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Matrix analytic = grads.wrt(vars[k]);
    double worst = 0.0;
    for (Eigen::Index idx = 0; idx < leaves[k].size(); ++idx) {
      const double orig = leaves[k](idx);
      probe[k](idx) = orig + step;
      const double up = evaluate(probe);
      probe[k](idx) = orig - step;
      const double down = evaluate(probe);
      probe[k](idx) = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic(idx);
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    result.per_leaf.push_back(worst);
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

}  // namespace gpn::diff
