// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Neutral on-disk dataset format:
//
//   meta.json         {"n_nodes", "n_features", "n_classes", "names"}
//   features.bin      row-major float32 LE, n_nodes x n_features
//   edges.bin         uint32 LE pairs (i, j), one per undirected edge, i < j
//   labels.bin        uint32 LE, n_nodes
//   split_fixed.json  optional {"train": [...], "val": [...], "test": [...]}

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpn/graph.hpp"

namespace gpn {

struct DatasetMeta {
  int n_nodes = 0;
  int n_features = 0;
  int n_classes = 0;
  std::vector<std::string> names;  // class names, may be empty
};

// Loads and symmetrizes a dataset directory. Throws FormatError on any
// inconsistency between meta.json and the binaries.
Graph load_dataset(const std::filesystem::path& dir);

// Writes `graph` (and its fixed split, if present) in the neutral format.
void save_dataset(const Graph& graph, const std::filesystem::path& dir,
                  const std::vector<std::string>& class_names = {});

struct VerifyReport {
  DatasetMeta meta;
  int n_edges = 0;
  bool has_fixed_split = false;
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
};

// Re-reads every file and lists all invariant violations instead of throwing.
VerifyReport verify_dataset(const std::filesystem::path& dir);

}  // namespace gpn
