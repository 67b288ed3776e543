// Copyright (c) 2026, The GPN Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpn/serialize.hpp"

#include <bit>
#include <type_traits>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gpn/errors.hpp"

namespace gpn {

namespace fs = std::filesystem;

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const TrainConfig& c) {
  return Json{{"lr_predictor", c.lr_predictor},
              {"lr_generator", c.lr_generator},
              {"weight_decay", c.weight_decay},
              {"eta", optional_number(c.eta)},
              {"epochs_pretrain", c.epochs_pretrain},
              {"epochs_main", c.epochs_main},
              {"approx", approx_name(c.approx)},
              {"fda_epsilon_scale", c.fda_epsilon_scale},
              {"heads", c.heads},
              {"seed", c.seed},
              {"hidden", c.hidden},
              {"gen_hidden", c.gen_hidden},
              {"gen_embed", c.gen_embed},
              {"kernel", kernel_name(c.kernel)},
              {"top_k", c.top_k},
              {"residual_clamp", c.residual_clamp},
              {"gen_output_scale", c.gen_output_scale}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, v] : j.items()) {
    const std::string p = path + "." + key;
    if (key == "lr_predictor") c.lr_predictor = json_field<double>(v, p);
    else if (key == "lr_generator") c.lr_generator = json_field<double>(v, p);
    else if (key == "weight_decay") c.weight_decay = json_field<double>(v, p);
    else if (key == "eta") c.eta = v.is_null() ? std::nullopt : std::optional(json_field<double>(v, p));
    else if (key == "epochs_pretrain") c.epochs_pretrain = json_field<int>(v, p);
    else if (key == "epochs_main") c.epochs_main = json_field<int>(v, p);
    else if (key == "approx") {
      try {
        c.approx = parse_approx(json_field<std::string>(v, p));
      } catch (const ConfigError& e) {
        throw ConfigError(p + ": " + e.what());
      }
    }
    else if (key == "fda_epsilon_scale") c.fda_epsilon_scale = json_field<double>(v, p);
    else if (key == "heads") c.heads = json_field<int>(v, p);
    else if (key == "seed") c.seed = json_field<std::uint64_t>(v, p);
    else if (key == "hidden") c.hidden = json_field<int>(v, p);
    else if (key == "gen_hidden") c.gen_hidden = json_field<int>(v, p);
    else if (key == "gen_embed") c.gen_embed = json_field<int>(v, p);
    else if (key == "kernel") {
      try {
        c.kernel = parse_kernel(json_field<std::string>(v, p));
      } catch (const ConfigError& e) {
        throw ConfigError(p + ": " + e.what());
      }
    }
    else if (key == "top_k") c.top_k = json_field<int>(v, p);
    else if (key == "residual_clamp") c.residual_clamp = json_field<bool>(v, p);
    else if (key == "gen_output_scale") c.gen_output_scale = json_field<double>(v, p);
    else throw ConfigError(p + ": unknown field");
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

Json to_json(const EpochRecord& r) {
  return Json{{"epoch", r.epoch},
              {"phase", r.phase},
              {"head", r.head},
              {"upper_loss", optional_number(r.upper_loss)},
              {"step_losses", r.step_losses},
              {"train_accuracy", r.train_accuracy},
              {"val_loss", r.val_loss},
              {"val_accuracy", r.val_accuracy}};
}

Json to_json(const RunReport& r) {
  Json epochs = Json::array();
  for (const auto& e : r.epochs) epochs.push_back(to_json(e));
  const Json config = to_json(r.config);
  return Json{{"method", r.method},
              {"config", config},
              {"config_hash", hex_hash(config_hash(config))},
              {"n_nodes", r.n_nodes},
              {"best_epoch", r.best_epoch},
              {"selected_head", r.selected_head},
              {"head_val_accuracy", r.head_val_accuracy},
              {"train_accuracy", r.train_accuracy},
              {"val_accuracy", r.val_accuracy},
              {"test_accuracy", r.test_accuracy},
              {"epochs", epochs},
              {"timing", {{"wall_clock_seconds", r.wall_clock_seconds}}}};
}

std::uint64_t config_hash(const Json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_json_file(const Json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "gpn-checkpoint-v1";

struct NamedMatrix {
  std::string name;
  const Matrix* m;
};

void append_le(std::string& blob, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  blob.append(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void write_checkpoint(const std::vector<NamedMatrix>& mats, Json manifest, const fs::path& dir,
                      const std::string& stem) {
  fs::create_directories(dir);
  std::string blob;
  Json entries = Json::array();
  std::size_t offset = 0;
  for (const auto& [name, m] : mats) {
    entries.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"offset", offset}});
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) append_le(blob, (*m)(i, j));
    }
    offset += static_cast<std::size_t>(m->size());
  }
  manifest["format"] = kCheckpointFormat;
  manifest["dtype"] = "float64-le";
  manifest["order"] = "row-major";
  manifest["matrices"] = entries;
  manifest["total_values"] = offset;
  write_json_file(manifest, dir / (stem + ".json"));
  std::ofstream out(dir / (stem + ".bin"), std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint blob in " + dir.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

}  // namespace

void save_checkpoint(const GpnModel& model, const fs::path& dir, const std::string& stem) {
  std::vector<NamedMatrix> mats;
  for (std::size_t l = 0; l < model.pred.gcn.layers.size(); ++l) {
    mats.push_back({"predictor." + std::to_string(l), &model.pred.gcn.layers[l]});
  }
  for (std::size_t h = 0; h < model.gen.heads.size(); ++h) {
    for (std::size_t l = 0; l < model.gen.heads[h].layers.size(); ++l) {
      mats.push_back({"generator." + std::to_string(h) + "." + std::to_string(l),
                      &model.gen.heads[h].layers[l]});
    }
  }
  Json manifest = {{"kernel", kernel_name(model.gen.kernel)},
                   {"heads", model.gen.n_heads()},
                   {"top_k", model.gen.top_k ? Json(*model.gen.top_k) : Json(nullptr)},
                   {"residual_clamp", model.gen.residual_clamp}};
  write_checkpoint(mats, std::move(manifest), dir, stem);
}

void save_checkpoint(const PredictorParams& pred, const fs::path& dir, const std::string& stem) {
  std::vector<NamedMatrix> mats;
  for (std::size_t l = 0; l < pred.gcn.layers.size(); ++l) {
    mats.push_back({"predictor." + std::to_string(l), &pred.gcn.layers[l]});
  }
  write_checkpoint(mats, Json{{"heads", 0}}, dir, stem);
}

Checkpoint load_checkpoint(const fs::path& dir, const std::string& stem) {
  Json manifest;
  try {
    manifest = read_json_file(dir / (stem + ".json"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  try {
    if (manifest.at("format") != kCheckpointFormat) {
      throw FormatError("unsupported checkpoint format " + manifest.at("format").dump());
    }
    std::ifstream in(dir / (stem + ".bin"), std::ios::binary);
    if (!in) throw FormatError("missing " + stem + ".bin");
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto total = manifest.at("total_values").get<std::size_t>();
    if (blob.size() != total * sizeof(double)) {
      throw FormatError("checkpoint blob has " + std::to_string(blob.size()) + " bytes, expected " +
                        std::to_string(total * sizeof(double)));
    }

    Checkpoint ck;
    const int heads = manifest.at("heads").get<int>();
    GeneratorParams gen;
    if (heads > 0) {
      gen.heads.resize(static_cast<std::size_t>(heads));
      gen.kernel = parse_kernel(manifest.at("kernel").get<std::string>());
      if (!manifest.at("top_k").is_null()) gen.top_k = manifest["top_k"].get<int>();
      gen.residual_clamp = manifest.at("residual_clamp").get<bool>();
    }
    for (const auto& e : manifest.at("matrices")) {
      const auto name = e.at("name").get<std::string>();
      const auto rows = e.at("rows").get<Eigen::Index>();
      const auto cols = e.at("cols").get<Eigen::Index>();
      const auto offset = e.at("offset").get<std::size_t>();
      if (offset + static_cast<std::size_t>(rows * cols) > total) {
        throw FormatError("matrix " + name + " exceeds the blob");
      }
      Matrix m(rows, cols);
      const char* base = blob.data() + offset * sizeof(double);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          m(i, j) = read_le(base + static_cast<std::size_t>(i * cols + j) * sizeof(double));
        }
      }
      if (name.rfind("predictor.", 0) == 0) {
        ck.pred.gcn.layers.push_back(std::move(m));
      } else if (name.rfind("generator.", 0) == 0) {
        const auto head = std::stoul(name.substr(10, name.find('.', 10) - 10));
        if (head >= gen.heads.size()) throw FormatError("matrix " + name + " names a missing head");
        gen.heads[head].layers.push_back(std::move(m));
      } else {
        throw FormatError("unknown matrix name " + name);
      }
    }
    ck.pred.gcn.validate();
    if (heads > 0) {
      gen.validate();
      ck.gen = std::move(gen);
    }
    return ck;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace gpn
