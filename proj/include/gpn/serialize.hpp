// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of configs and reports, and the parameter checkpoint format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "gpn/bilevel.hpp"
#include "gpn/errors.hpp"

namespace gpn {

using Json = nlohmann::json;

// Typed read of one config value; errors name `path`.
template <typename T>
T json_field(const Json& v, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(path + ": expected a nonnegative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
    } else {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
    }
    return v.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json to_json(const TrainConfig& config);
// Overlays `j` on `base`; unknown keys and wrong types raise ConfigError
// naming the offending field path (prefixed by `path`).
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {},
                                   const std::string& path = "train");

Json to_json(const EpochRecord& rec);
// `timing` holds wall-clock data; everything else is a deterministic function
// of config, seed and data.
Json to_json(const RunReport& report);

// FNV-1a over the canonical (sorted-key, compact) dump.
std::uint64_t config_hash(const Json& j);
std::string hex_hash(std::uint64_t h);

// Checkpoint: `<stem>.json` manifest (format, kernel, heads, per-matrix name,
// rows, cols, offset in doubles) plus `<stem>.bin`, the matrices back to back
// as row-major float64 little-endian.
void save_checkpoint(const GpnModel& model, const std::filesystem::path& dir,
                     const std::string& stem = "checkpoint");
void save_checkpoint(const PredictorParams& pred, const std::filesystem::path& dir,
                     const std::string& stem = "checkpoint");

struct Checkpoint {
  PredictorParams pred;
  std::optional<GeneratorParams> gen;  // absent for predictor-only checkpoints
};
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           const std::string& stem = "checkpoint");

void write_json_file(const Json& j, const std::filesystem::path& path);
Json read_json_file(const std::filesystem::path& path);

}  // namespace gpn
