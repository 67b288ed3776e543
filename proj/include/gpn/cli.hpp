// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 invalid config, missing
// input or failed check, 2 usage error.

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gpn/evalharness.hpp"

namespace gpn {

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Applies one `dotted.path=value` override to a config document. The value is
// read as JSON when it parses, otherwise as a string.
void apply_override(Json& config, const std::string& assignment);

}  // namespace gpn
