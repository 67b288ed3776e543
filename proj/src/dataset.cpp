// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gpn/errors.hpp"

namespace gpn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T from_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = __builtin_bswap32(bits);
    std::memcpy(&v, &bits, sizeof bits);
  }
  return v;
}

template <typename T>
std::vector<T> read_u32_file(const fs::path& path, std::vector<std::string>& issues) {
  static_assert(sizeof(T) == 4);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    issues.push_back("missing " + path.filename().string());
    return {};
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) {
    issues.push_back(path.filename().string() + ": size " + std::to_string(bytes.size()) +
                     " is not a multiple of 4");
  }
  std::vector<T> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), out.size() * 4);
  for (auto& v : out) v = from_le(v);
  return out;
}

template <typename T>
void write_u32_file(const fs::path& path, const std::vector<T>& values) {
  static_assert(sizeof(T) == 4);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (T v : values) {
    v = from_le(v);  // byte swap is an involution
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing " + path.filename().string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.filename().string() + ": " + e.what());
  }
}

struct RawDataset {
  DatasetMeta meta;
  std::vector<float> features;
  std::vector<std::uint32_t> edges;
  std::vector<std::uint32_t> labels;
  std::optional<json> split;
};

RawDataset read_raw(const fs::path& dir, std::vector<std::string>& issues) {
  RawDataset raw;
  try {
    const json meta = read_json(dir / "meta.json");
    raw.meta.n_nodes = meta.at("n_nodes").get<int>();
    raw.meta.n_features = meta.at("n_features").get<int>();
    raw.meta.n_classes = meta.at("n_classes").get<int>();
    if (meta.contains("names")) raw.meta.names = meta["names"].get<std::vector<std::string>>();
  } catch (const FormatError& e) {
    issues.emplace_back(e.what());
    return raw;
  } catch (const json::exception& e) {
    issues.push_back(std::string("meta.json: ") + e.what());
    return raw;
  }
  if (raw.meta.n_nodes <= 0 || raw.meta.n_features <= 0 || raw.meta.n_classes <= 0) {
    issues.emplace_back("meta.json: counts must be positive");
  }
  raw.features = read_u32_file<float>(dir / "features.bin", issues);
  raw.edges = read_u32_file<std::uint32_t>(dir / "edges.bin", issues);
  raw.labels = read_u32_file<std::uint32_t>(dir / "labels.bin", issues);
  if (fs::exists(dir / "split_fixed.json")) {
    try {
      raw.split = read_json(dir / "split_fixed.json");
    } catch (const FormatError& e) {
      issues.emplace_back(e.what());
    }
  }
  return raw;
}

void check_raw(const RawDataset& raw, std::vector<std::string>& issues) {
  const auto n = static_cast<std::uint64_t>(raw.meta.n_nodes);
  const auto f = static_cast<std::uint64_t>(raw.meta.n_features);
  if (raw.features.size() != n * f) {
    issues.push_back("features.bin: expected " + std::to_string(n * f) + " floats, found " +
                     std::to_string(raw.features.size()));
  }
  for (std::size_t i = 0; i < raw.features.size(); ++i) {
    if (!std::isfinite(raw.features[i])) {
      issues.push_back("features.bin: non-finite value at flat index " + std::to_string(i));
      break;
    }
  }
  if (raw.labels.size() != n) {
    issues.push_back("labels.bin: expected " + std::to_string(n) + " labels, found " +
                     std::to_string(raw.labels.size()));
  }
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    if (raw.labels[i] >= static_cast<std::uint32_t>(raw.meta.n_classes)) {
      issues.push_back("labels.bin: label " + std::to_string(raw.labels[i]) + " at index " +
                       std::to_string(i) + " >= n_classes " + std::to_string(raw.meta.n_classes));
    }
  }
  if (raw.edges.size() % 2 != 0) issues.emplace_back("edges.bin: odd number of endpoints");
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t k = 0; k + 1 < raw.edges.size(); k += 2) {
    const auto i = raw.edges[k];
    const auto j = raw.edges[k + 1];
    const std::string where = "edges.bin: edge " + std::to_string(k / 2) + " (" +
                              std::to_string(i) + ", " + std::to_string(j) + ")";
    if (i >= n || j >= n) {
      issues.push_back(where + " out of range");
    } else if (i >= j) {
      issues.push_back(where + " violates i < j");
    } else if (!seen.insert({i, j}).second) {
      issues.push_back(where + " is a duplicate");
    }
  }
  if (raw.split) {
    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    const char* names[] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
      if (!raw.split->contains(names[s]) || !(*raw.split)[names[s]].is_array()) {
        issues.push_back(std::string("split_fixed.json: missing array '") + names[s] + "'");
        continue;
      }
      const auto& arr = (*raw.split)[names[s]];
      if (arr.empty()) issues.push_back(std::string("split_fixed.json: '") + names[s] + "' is empty");
      for (const auto& v : arr) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
            static_cast<std::uint64_t>(v.get<std::int64_t>()) >= n) {
          issues.push_back(std::string("split_fixed.json: bad index in '") + names[s] + "': " +
                           v.dump());
          continue;
        }
        auto& o = owner[v.get<std::size_t>()];
        if (o >= 0) {
          issues.push_back(std::string("split_fixed.json: node ") + v.dump() + " in both '" +
                           names[o] + "' and '" + names[s] + "'");
        }
        o = s;
      }
    }
  }
}

}  // namespace

VerifyReport verify_dataset(const fs::path& dir) {
  VerifyReport report;
  RawDataset raw = read_raw(dir, report.issues);
  report.meta = raw.meta;
  report.n_edges = static_cast<int>(raw.edges.size() / 2);
  report.has_fixed_split = raw.split.has_value();
  if (report.meta.n_nodes > 0) check_raw(raw, report.issues);
  return report;
}

Graph load_dataset(const fs::path& dir) {
  std::vector<std::string> issues;
  RawDataset raw = read_raw(dir, issues);
  if (issues.empty()) check_raw(raw, issues);
  if (!issues.empty()) {
    std::ostringstream msg;
    msg << dir.string() << ": " << issues.size() << " problem(s); first: " << issues.front();
    throw FormatError(msg.str());
  }

  const int n = raw.meta.n_nodes;
  const int f = raw.meta.n_features;
  Matrix features(n, f);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) {
      features(i, j) = raw.features[static_cast<std::size_t>(i) * f + j];
    }
  }
  std::vector<Edge> edges;
  edges.reserve(raw.edges.size() / 2);
  for (std::size_t k = 0; k < raw.edges.size(); k += 2) {
    edges.push_back({static_cast<int>(raw.edges[k]), static_cast<int>(raw.edges[k + 1])});
  }
  std::vector<int> labels(raw.labels.begin(), raw.labels.end());

  std::optional<SplitMasks> split;
  if (raw.split) {
    auto mask = [&](const char* key) {
      return indices_to_mask((*raw.split)[key].get<std::vector<int>>(), n);
    };
    split = SplitMasks{mask("train"), mask("val"), mask("test")};
  }
  return Graph::from_edges(std::move(features), edges, std::move(labels), raw.meta.n_classes,
                           std::move(split));
}

void save_dataset(const Graph& graph, const fs::path& dir,
                  const std::vector<std::string>& class_names) {
  fs::create_directories(dir);
  json meta = {{"n_nodes", graph.n_nodes()},
               {"n_features", graph.n_features()},
               {"n_classes", graph.n_classes()},
               {"names", class_names}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';

  std::vector<float> features;
  features.reserve(static_cast<std::size_t>(graph.n_nodes()) * graph.n_features());
  for (int i = 0; i < graph.n_nodes(); ++i) {
    for (int j = 0; j < graph.n_features(); ++j) {
      features.push_back(static_cast<float>(graph.features()(i, j)));
    }
  }
  write_u32_file(dir / "features.bin", features);

  std::vector<std::uint32_t> edges;
  for (const auto& e : graph.edge_list()) {
    edges.push_back(static_cast<std::uint32_t>(e.u));
    edges.push_back(static_cast<std::uint32_t>(e.v));
  }
  write_u32_file(dir / "edges.bin", edges);
  write_u32_file(dir / "labels.bin",
                 std::vector<std::uint32_t>(graph.labels().begin(), graph.labels().end()));

  const fs::path split_path = dir / "split_fixed.json";
  if (graph.fixed_split()) {
    const auto& s = *graph.fixed_split();
    json split = {{"train", mask_indices(s.train)},
                  {"val", mask_indices(s.val)},
                  {"test", mask_indices(s.test)}};
    std::ofstream(split_path) << split.dump() << '\n';
  } else {
    fs::remove(split_path);
  }
}

}  // namespace gpn
