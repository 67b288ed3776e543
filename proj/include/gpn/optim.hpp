// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "gpn/graph.hpp"

namespace gpn {

struct AdamOptions {
  double lr = 0.005;
  double weight_decay = 0.0;  // L2 coefficient added to the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with coupled L2 weight decay: g <- g + weight_decay * p before the
// moment updates. Moments are allocated on the first step.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Matrix> params, std::span<const Matrix> grads);

  const AdamOptions& options() const { return options_; }
  long long steps() const { return t_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  long long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace gpn
