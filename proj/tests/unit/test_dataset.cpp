// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gpn/dataset.hpp"
#include "gpn/errors.hpp"
#include "test_util.hpp"

using namespace gpn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gpn_test_dataset_" + name);
  fs::remove_all(dir);
  return dir;
}

void write_words(const fs::path& path, const std::vector<std::uint32_t>& words) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (std::uint32_t w : words) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(w), static_cast<unsigned char>(w >> 8),
                                    static_cast<unsigned char>(w >> 16),
                                    static_cast<unsigned char>(w >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

// 3 nodes, 2 features, path 0-1-2, labels 0 1 0; written byte by byte.
fs::path write_tiny(const std::string& name) {
  const fs::path dir = fresh_dir(name);
  fs::create_directories(dir);
  std::ofstream(dir / "meta.json") << R"({"n_nodes": 3, "n_features": 2, "n_classes": 2, "names": ["a", "b"]})";
  // 1.0f = 0x3f800000, 2.0f = 0x40000000, -0.5f = 0xbf000000
  write_words(dir / "features.bin", {0x3f800000, 0, 0, 0x40000000, 0xbf000000, 0x3f800000});
  write_words(dir / "edges.bin", {0, 1, 1, 2});
  write_words(dir / "labels.bin", {0, 1, 0});
  return dir;
}

bool has_issue(const VerifyReport& r, const std::string& needle) {
  for (const auto& i : r.issues) {
    if (i.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("load_dataset reads the little-endian neutral format") {
  const fs::path dir = write_tiny("tiny");
  const Graph g = load_dataset(dir);
  CHECK(g.n_nodes() == 3);
  CHECK(g.n_features() == 2);
  CHECK(g.n_classes() == 2);
  CHECK(g.n_edges() == 2);
  Matrix expected(3, 2);
  expected << 1.0, 0.0, 0.0, 2.0, -0.5, 1.0;
  CHECK(g.features() == expected);
  CHECK(g.labels() == std::vector<int>{0, 1, 0});
  CHECK(Matrix(g.adjacency())(1, 0) == 1.0);
  CHECK_FALSE(g.fixed_split().has_value());

  const VerifyReport r = verify_dataset(dir);
  CHECK(r.ok());
  CHECK(r.meta.names == std::vector<std::string>{"a", "b"});
  CHECK(r.n_edges == 2);
}

TEST_CASE("save_dataset / load_dataset round trip with fixed split") {
  SbmOptions o;
  o.n_per_block = 10;
  const Graph base = generate_sbm(o);
  const SplitMasks split = make_splits(base, 2, 3, SplitMode::kRandom, 1);
  std::vector<Edge> edges = base.edge_list();
  const Graph g = Graph::from_edges(base.features().cast<float>().cast<double>(), edges,
                                    base.labels(), base.n_classes(), split);
  const fs::path dir = fresh_dir("roundtrip");
  save_dataset(g, dir, {"x", "y"});
  CHECK(verify_dataset(dir).ok());
  CHECK(verify_dataset(dir).has_fixed_split);
  const Graph back = load_dataset(dir);
  CHECK(back.features() == g.features());
  CHECK(back.labels() == g.labels());
  CHECK(back.edge_list() == g.edge_list());
  REQUIRE(back.fixed_split().has_value());
  CHECK(back.fixed_split()->train == split.train);
  CHECK(back.fixed_split()->val == split.val);
  CHECK(back.fixed_split()->test == split.test);
}

TEST_CASE("verify_dataset reports each violation") {
  SUBCASE("feature count mismatch") {
    const fs::path dir = write_tiny("feat");
    write_words(dir / "features.bin", {0, 0, 0});
    const auto r = verify_dataset(dir);
    CHECK_FALSE(r.ok());
    CHECK(has_issue(r, "features.bin"));
    CHECK_THROWS_AS(load_dataset(dir), FormatError);
  }
  SUBCASE("non-finite feature") {
    const fs::path dir = write_tiny("nan");
    write_words(dir / "features.bin", {0x7fc00000, 0, 0, 0, 0, 0});
    CHECK(has_issue(verify_dataset(dir), "non-finite"));
  }
  SUBCASE("label out of range") {
    const fs::path dir = write_tiny("label");
    write_words(dir / "labels.bin", {0, 2, 0});
    CHECK(has_issue(verify_dataset(dir), "n_classes"));
  }
  SUBCASE("edge ordering, range and duplicates") {
    const fs::path dir = write_tiny("edges");
    write_words(dir / "edges.bin", {1, 0, 0, 5, 0, 2, 0, 2});
    const auto r = verify_dataset(dir);
    CHECK(has_issue(r, "violates i < j"));
    CHECK(has_issue(r, "out of range"));
    CHECK(has_issue(r, "duplicate"));
  }
  SUBCASE("truncated binary") {
    const fs::path dir = write_tiny("trunc");
    std::ofstream(dir / "labels.bin", std::ios::binary | std::ios::trunc) << "abcdef";
    CHECK(has_issue(verify_dataset(dir), "not a multiple of 4"));
  }
  SUBCASE("overlapping and empty split arrays") {
    const fs::path dir = write_tiny("split");
    std::ofstream(dir / "split_fixed.json") << R"({"train": [0], "val": [0], "test": []})";
    const auto r = verify_dataset(dir);
    CHECK(has_issue(r, "in both"));
    CHECK(has_issue(r, "empty"));
  }
  SUBCASE("missing meta") {
    const fs::path dir = write_tiny("meta");
    fs::remove(dir / "meta.json");
    CHECK(has_issue(verify_dataset(dir), "meta.json"));
    CHECK_THROWS_AS(load_dataset(dir), FormatError);
  }
}
