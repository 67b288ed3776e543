// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Built-in finite-difference suite over every differentiable op and the two
// training objectives, on small random graphs.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gpn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;  // max over cases
  int n_checks = 0;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckEntry> entries;
  int n_cases = 0;
  double max_rel_error = 0.0;
};

// Case c draws N in [4, 10] and fresh inputs from derive_seed(seed, c).
GradCheckSuiteResult run_gradcheck_suite(int n_cases = 100, std::uint64_t seed = 0,
                                         double step = 1e-5);

}  // namespace gpn
