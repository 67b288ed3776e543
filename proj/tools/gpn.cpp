// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "gpn/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Dense N x N temporaries are reallocated every step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  std::vector<std::string> args(argv + 1, argv + argc);
  return gpn::run_cli(args, std::cout, std::cerr);
}
