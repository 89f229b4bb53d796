// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "neoxsim/weights.hpp"

namespace neoxsim {

namespace {

using json = nlohmann::json;

std::runtime_error io_error(const std::filesystem::path& path, const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

void put_le32(std::ostream& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  const char bytes[4] = {static_cast<char>(u & 0xFF), static_cast<char>((u >> 8) & 0xFF),
                         static_cast<char>((u >> 16) & 0xFF), static_cast<char>((u >> 24) & 0xFF)};
  out.write(bytes, 4);
}

float get_le32(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

}  // namespace

void save_weights(const BlockWeights<double>& w, const std::filesystem::path& manifest,
                  const std::filesystem::path& blob) {
  std::ofstream blob_out(blob, std::ios::binary);
  if (!blob_out) throw io_error(blob, "cannot open for writing");
  json tensors = json::array();
  std::size_t offset = 0;
  w.for_each_tensor([&](const char* name, const double* data, Eigen::Index rows, Eigen::Index cols) {
    json shape = cols == 1 ? json::array({rows}) : json::array({rows, cols});
    tensors.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    const auto count = static_cast<std::size_t>(rows * cols);
    for (std::size_t i = 0; i < count; ++i) put_le32(blob_out, static_cast<float>(data[i]));
    offset += count * 4;
  });
  if (!blob_out) throw io_error(blob, "write failed");

  const json doc = {{"format", "neoxsim-weights"},
                    {"version", 1},
                    {"dtype", "float32"},
                    {"byte_order", "little"},
                    {"tensors", tensors}};
  std::ofstream man_out(manifest);
  if (!man_out) throw io_error(manifest, "cannot open for writing");
  man_out << doc.dump(2) << '\n';
  if (!man_out) throw io_error(manifest, "write failed");
}

BlockWeights<double> load_weights(const ModelConfig& cfg, const std::filesystem::path& manifest,
                                  const std::filesystem::path& blob) {
  std::ifstream man_in(manifest);
  if (!man_in) throw io_error(manifest, "cannot open manifest");
  json doc;
  try {
    doc = json::parse(man_in);
  } catch (const json::exception& e) {
    throw io_error(manifest, std::string("malformed manifest: ") + e.what());
  }
  if (doc.value("dtype", "") != "float32" || doc.value("byte_order", "") != "little") {
    throw io_error(manifest, "only little-endian float32 blobs are supported");
  }

  std::ifstream blob_in(blob, std::ios::binary);
  if (!blob_in) throw io_error(blob, "cannot open weight blob");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob_in)),
                                         std::istreambuf_iterator<char>());

  std::map<std::string, json> entries;
  for (const auto& t : doc.at("tensors")) entries[t.at("name").get<std::string>()] = t;

  auto w = BlockWeights<double>::zeros(cfg);
  w.for_each_tensor([&](const char* name, double* data, Eigen::Index rows, Eigen::Index cols) {
    const auto it = entries.find(name);
    if (it == entries.end()) throw io_error(manifest, std::string("missing tensor '") + name + "'");
    std::vector<Eigen::Index> shape = it->second.at("shape").get<std::vector<Eigen::Index>>();
    const std::vector<Eigen::Index> want =
        cols == 1 ? std::vector<Eigen::Index>{rows} : std::vector<Eigen::Index>{rows, cols};
    if (shape != want) {
      throw io_error(manifest, std::string("tensor '") + name + "' shape does not match config");
    }
    const auto offset = it->second.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(rows * cols);
    if (offset + count * 4 > bytes.size()) {
      throw io_error(blob, std::string("tensor '") + name + "' extends past end of blob");
    }
    for (std::size_t i = 0; i < count; ++i) data[i] = get_le32(bytes.data() + offset + 4 * i);
  });
  return w;
}

WeightSource load_or_synthesize(const ModelConfig& cfg,
                                const std::optional<std::filesystem::path>& manifest,
                                const std::optional<std::filesystem::path>& blob,
                                std::uint64_t seed) {
  WeightSource src;
  if (manifest && blob && std::filesystem::exists(*blob)) {
    src.weights = load_weights(cfg, *manifest, *blob);
    return src;
  }
  src.synthesized = true;
  if (blob && !std::filesystem::exists(*blob)) {
    src.notice = "weight blob '" + blob->string() + "' not found; synthesizing weights from seed " +
                 std::to_string(seed);
  } else {
    src.notice = "no weight blob given; synthesizing weights from seed " + std::to_string(seed);
  }
  src.weights = BlockWeights<double>::synthesize(cfg, seed);
  return src;
}

}  // namespace neoxsim
