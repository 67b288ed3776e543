// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "gpn/graph.hpp"

namespace gpn {

// Percentage of masked rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Matrix& probs, std::span<const int> labels, const Mask& mask);

// Mean of -log probs(i, label_i) over masked rows.
double cross_entropy(const Matrix& probs, std::span<const int> labels, const Mask& mask);

}  // namespace gpn
