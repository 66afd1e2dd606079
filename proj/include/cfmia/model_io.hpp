// Copyright 2026 The cfmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfmia/common.hpp"
#include "cfmia/layers.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/vae.hpp"

// On-disk model format: a JSON manifest plus a flat parameter blob.
//
// Blob layout (all integers and doubles little-endian):
//   8 bytes   magic "CFMIAPB1"
//   u64       tensor count T
//   T x (u64 rows, u64 cols)
//   doubles   each tensor in row-major order, in header order
//
// Every Dense layer contributes two tensors: weight (in x out) and bias
// (1 x out). The manifest lists the same shapes and names them.
namespace cfmia {

inline constexpr std::array<char, 8> kBlobMagic = {'C', 'F', 'M', 'I', 'A', 'P', 'B', '1'};
inline constexpr int kModelFormatVersion = 1;

namespace detail {

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail_runtime(path, ": truncated parameter blob");
  return to_little_endian(v);
}

inline void write_blob(const std::string& path, const std::vector<Dense>& layers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot write '", path, "'");
  out.write(kBlobMagic.data(), kBlobMagic.size());
  put<std::uint64_t>(out, 2 * layers.size());
  for (const auto& l : layers) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(l.in()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(l.out()));
    put<std::uint64_t>(out, 1);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(l.out()));
  }
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put<double>(out, l.weight(r, c));
    }
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) put<double>(out, l.bias[c]);
  }
  if (!out) fail_runtime("write to '", path, "' failed");
}

inline void read_blob(const std::string& path, std::vector<Dense>& layers) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_runtime("cannot open '", path, "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kBlobMagic) fail_runtime(path, ": not a parameter blob (bad magic)");
  const auto count = get<std::uint64_t>(in, path);
  if (count != 2 * layers.size()) {
    fail_runtime(path, ": blob holds ", count, " tensors, manifest expects ", 2 * layers.size());
  }
  for (const auto& l : layers) {
    const auto wr = get<std::uint64_t>(in, path), wc = get<std::uint64_t>(in, path);
    const auto br = get<std::uint64_t>(in, path), bc = get<std::uint64_t>(in, path);
    if (wr != static_cast<std::uint64_t>(l.in()) || wc != static_cast<std::uint64_t>(l.out()) ||
        br != 1 || bc != static_cast<std::uint64_t>(l.out())) {
      fail_runtime(path, ": tensor shape disagrees with manifest");
    }
  }
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = get<double>(in, path);
    }
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) l.bias[c] = get<double>(in, path);
  }
}

inline nlohmann::json tensor_table(const std::vector<Dense>& layers) {
  nlohmann::json t = nlohmann::json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    t.push_back({{"name", "layer" + std::to_string(i) + ".weight"},
                 {"shape", {layers[i].in(), layers[i].out()}}});
    t.push_back({{"name", "layer" + std::to_string(i) + ".bias"}, {"shape", {1, layers[i].out()}}});
  }
  return t;
}

inline nlohmann::json nan_as_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double null_as_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const TrainingMeta& m) {
  return {{"seed", m.seed},
          {"epochs", m.epochs},
          {"learning_rate", m.learning_rate},
          {"batch_size", m.batch_size},
          {"first_epoch_loss", detail::nan_as_null(m.first_epoch_loss)},
          {"final_epoch_loss", detail::nan_as_null(m.final_epoch_loss)},
          {"train_accuracy", detail::nan_as_null(m.train_accuracy)},
          {"test_accuracy", detail::nan_as_null(m.test_accuracy)}};
}

inline TrainingMeta training_meta_from_json(const nlohmann::json& j) {
  TrainingMeta m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.epochs = j.at("epochs").get<int>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.batch_size = j.at("batch_size").get<std::size_t>();
  m.first_epoch_loss = detail::null_as_nan(j.at("first_epoch_loss"));
  m.final_epoch_loss = detail::null_as_nan(j.at("final_epoch_loss"));
  m.train_accuracy = detail::null_as_nan(j.at("train_accuracy"));
  m.test_accuracy = detail::null_as_nan(j.at("test_accuracy"));
  return m;
}

// Writes <stem>.json and <stem>.bin.
inline void save_model(const Model& model, const std::string& stem) {
  const std::string blob = stem + ".bin";
  nlohmann::json j = {{"format", "cfmia-model"},
                      {"version", kModelFormatVersion},
                      {"kind", "classifier"},
                      {"input_dim", model.input_dim()},
                      {"architecture", model.architecture()},
                      {"training_meta", to_json(model.meta())},
                      {"tensors", detail::tensor_table(model.layers())},
                      {"blob", std::filesystem::path(blob).filename().string()}};
  std::ofstream out(stem + ".json");
  if (!out) fail_runtime("cannot write '", stem, ".json'");
  out << j.dump(2) << '\n';
  detail::write_blob(blob, model.layers());
}

namespace detail {

inline nlohmann::json read_manifest(const std::string& stem, const char* kind) {
  std::ifstream in(stem + ".json");
  if (!in) fail_runtime("cannot open '", stem, ".json'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_runtime(stem, ".json: ", e.what());
  }
  if (j.value("format", "") != "cfmia-model" || j.value("kind", "") != kind) {
    fail_runtime(stem, ".json: not a cfmia ", kind, " manifest");
  }
  if (j.value("version", 0) != kModelFormatVersion) {
    fail_runtime(stem, ".json: unsupported format version");
  }
  return j;
}

inline std::string blob_path(const std::string& stem, const nlohmann::json& j) {
  return (std::filesystem::path(stem).parent_path() / j.at("blob").get<std::string>()).string();
}

}  // namespace detail

inline Model load_model(const std::string& stem) {
  const auto j = detail::read_manifest(stem, "classifier");
  Model model(j.at("input_dim").get<std::size_t>(),
              j.at("architecture").get<std::vector<std::size_t>>());
  model.meta() = training_meta_from_json(j.at("training_meta"));
  detail::read_blob(detail::blob_path(stem, j), model.layers());
  return model;
}

inline void save_vae(const VaeModel& vae, const std::string& stem) {
  const std::string blob = stem + ".bin";
  nlohmann::json j = {{"format", "cfmia-model"},
                      {"version", kModelFormatVersion},
                      {"kind", "vae"},
                      {"input_dim", vae.input_dim()},
                      {"hidden", vae.shape().hidden},
                      {"latent", vae.shape().latent},
                      {"training_meta", to_json(vae.meta())},
                      {"tensors", detail::tensor_table(vae.layers())},
                      {"blob", std::filesystem::path(blob).filename().string()}};
  std::ofstream out(stem + ".json");
  if (!out) fail_runtime("cannot write '", stem, ".json'");
  out << j.dump(2) << '\n';
  detail::write_blob(blob, vae.layers());
}

inline VaeModel load_vae(const std::string& stem) {
  const auto j = detail::read_manifest(stem, "vae");
  VaeModel vae(j.at("input_dim").get<std::size_t>(),
               VaeShape{j.at("hidden").get<std::size_t>(), j.at("latent").get<std::size_t>()});
  vae.meta() = training_meta_from_json(j.at("training_meta"));
  detail::read_blob(detail::blob_path(stem, j), vae.layers());
  return vae;
}

}  // namespace cfmia
