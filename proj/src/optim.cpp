// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/optim.hpp"

#include <cmath>
#include <string>

#include "gpn/errors.hpp"

namespace gpn {

void Adam::step(std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (m_.size() != params.size()) throw DimensionError("adam: parameter count changed");

  ++t_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = params[k];
    if (grads[k].rows() != p.rows() || grads[k].cols() != p.cols() || m_[k].rows() != p.rows() ||
        m_[k].cols() != p.cols()) {
      throw DimensionError("adam: gradient shape mismatch for parameter " + std::to_string(k));
    }
    Matrix g = grads[k];
    if (options_.weight_decay != 0.0) g += options_.weight_decay * p;
    m_[k] = options_.beta1 * m_[k] + (1.0 - options_.beta1) * g;
    v_[k] = options_.beta2 * v_[k] + (1.0 - options_.beta2) * g.cwiseAbs2();
    p.array() -= options_.lr * (m_[k].array() / bias1) /
                 ((v_[k].array() / bias2).sqrt() + options_.eps);
  }
}

}  // namespace gpn
