// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/metrics.hpp"

#include <cmath>
#include <string>

#include "gpn/errors.hpp"

namespace gpn {

namespace {

void check_inputs(const Matrix& probs, std::span<const int> labels, const Mask& mask) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows() ||
      static_cast<Eigen::Index>(mask.size()) != probs.rows()) {
    throw DimensionError("metrics: probs has " + std::to_string(probs.rows()) + " rows, labels " +
                         std::to_string(labels.size()) + ", mask " + std::to_string(mask.size()));
  }
  if (mask_count(mask) == 0) throw ConfigError("metrics: mask selects no nodes");
}

}  // namespace

double accuracy(const Matrix& probs, std::span<const int> labels, const Mask& mask) {
  check_inputs(probs, labels, mask);
  int correct = 0;
  int total = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    correct += best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
    ++total;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double cross_entropy(const Matrix& probs, std::span<const int> labels, const Mask& mask) {
  check_inputs(probs, labels, mask);
  double loss = 0.0;
  int total = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    loss -= std::log(probs(i, labels[static_cast<std::size_t>(i)]));
    ++total;
  }
  return loss / total;
}

}  // namespace gpn
