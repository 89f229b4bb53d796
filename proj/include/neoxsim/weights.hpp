// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_WEIGHTS_HPP
#define NEOXSIM_WEIGHTS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "neoxsim/config.hpp"
#include "neoxsim/prng.hpp"
#include "neoxsim/tensor.hpp"

namespace neoxsim {

/// Parameters of one decoder block. Matrices are [out x in], row-major.
/// qkv_weight uses the interleaved per-head layout (see qkv_project).
template <typename Scalar>
struct BlockWeights {
  Vector<Scalar> ln1_gain, ln1_bias;
  Matrix<Scalar> qkv_weight;
  Vector<Scalar> qkv_bias;
  Matrix<Scalar> out_weight;
  Vector<Scalar> out_bias;
  Vector<Scalar> ln2_gain, ln2_bias;
  Matrix<Scalar> up_weight;
  Vector<Scalar> up_bias;
  Matrix<Scalar> down_weight;
  Vector<Scalar> down_bias;

  /// All-zero parameters with unit LayerNorm gains.
  static BlockWeights zeros(const ModelConfig& cfg);

  /// Deterministic synthetic parameters; see synthesize_tensor for the recipe.
  static BlockWeights synthesize(const ModelConfig& cfg, std::uint64_t seed);

  void validate(const ModelConfig& cfg) const;

  template <typename Other>
  BlockWeights<Other> cast() const;

  /// Visits every tensor in manifest order as (name, data, rows, cols);
  /// vectors report cols == 1.
  template <typename F>
  void for_each_tensor(F&& f);
  template <typename F>
  void for_each_tensor(F&& f) const;
};

enum class TensorRole { Weight, Bias, LnGain, LnBias };

/// Synthetic parameter values, drawn from SplitMix64 seeded with
/// derive_seed(seed, {tensor_index}) in row-major order, then rounded to
/// float32 so they survive a blob round trip:
///   Weight  u(-1, 1) / sqrt(fan_in)
///   Bias    0.1 * u(-1, 1)
///   LnGain  1 + 0.1 * u(-1, 1)
///   LnBias  0.1 * u(-1, 1)
template <typename Scalar>
void synthesize_tensor(Scalar* data, std::size_t count, std::size_t fan_in, TensorRole role,
                       std::uint64_t seed, std::uint64_t tensor_index) {
  SplitMix64 rng(derive_seed(seed, {tensor_index}));
  const double weight_scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    double v = 0.0;
    switch (role) {
      case TensorRole::Weight: v = u * weight_scale; break;
      case TensorRole::Bias: v = 0.1 * u; break;
      case TensorRole::LnGain: v = 1.0 + 0.1 * u; break;
      case TensorRole::LnBias: v = 0.1 * u; break;
    }
    data[i] = static_cast<Scalar>(static_cast<float>(v));
  }
}

namespace detail {

inline TensorRole role_of(const std::string& name) {
  if (name.ends_with("_gain")) return TensorRole::LnGain;
  if (name.starts_with("ln") && name.ends_with("_bias")) return TensorRole::LnBias;
  if (name.ends_with("_bias")) return TensorRole::Bias;
  return TensorRole::Weight;
}

}  // namespace detail

template <typename Scalar>
template <typename F>
void BlockWeights<Scalar>::for_each_tensor(F&& f) {
  auto vec = [&](const char* name, Vector<Scalar>& v) { f(name, v.data(), v.size(), Eigen::Index{1}); };
  auto mat = [&](const char* name, Matrix<Scalar>& m) { f(name, m.data(), m.rows(), m.cols()); };
  vec("ln1_gain", ln1_gain);
  vec("ln1_bias", ln1_bias);
  mat("qkv_weight", qkv_weight);
  vec("qkv_bias", qkv_bias);
  mat("out_weight", out_weight);
  vec("out_bias", out_bias);
  vec("ln2_gain", ln2_gain);
  vec("ln2_bias", ln2_bias);
  mat("up_weight", up_weight);
  vec("up_bias", up_bias);
  mat("down_weight", down_weight);
  vec("down_bias", down_bias);
}

template <typename Scalar>
template <typename F>
void BlockWeights<Scalar>::for_each_tensor(F&& f) const {
  const_cast<BlockWeights*>(this)->for_each_tensor(
      [&](const char* name, Scalar* data, Eigen::Index rows, Eigen::Index cols) {
        f(name, static_cast<const Scalar*>(data), rows, cols);
      });
}

template <typename Scalar>
BlockWeights<Scalar> BlockWeights<Scalar>::zeros(const ModelConfig& cfg) {
  const auto h = static_cast<Eigen::Index>(cfg.hidden);
  const auto m = static_cast<Eigen::Index>(cfg.d_mlp);
  BlockWeights w;
  w.ln1_gain = Vector<Scalar>::Ones(h);
  w.ln1_bias = Vector<Scalar>::Zero(h);
  w.qkv_weight = Matrix<Scalar>::Zero(3 * h, h);
  w.qkv_bias = Vector<Scalar>::Zero(3 * h);
  w.out_weight = Matrix<Scalar>::Zero(h, h);
  w.out_bias = Vector<Scalar>::Zero(h);
  w.ln2_gain = Vector<Scalar>::Ones(h);
  w.ln2_bias = Vector<Scalar>::Zero(h);
  w.up_weight = Matrix<Scalar>::Zero(m, h);
  w.up_bias = Vector<Scalar>::Zero(m);
  w.down_weight = Matrix<Scalar>::Zero(h, m);
  w.down_bias = Vector<Scalar>::Zero(h);
  return w;
}

template <typename Scalar>
BlockWeights<Scalar> BlockWeights<Scalar>::synthesize(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BlockWeights w = zeros(cfg);
  std::uint64_t index = 0;
  w.for_each_tensor([&](const char* name, Scalar* data, Eigen::Index rows, Eigen::Index cols) {
    const auto count = static_cast<std::size_t>(rows * cols);
    synthesize_tensor(data, count, static_cast<std::size_t>(cols), detail::role_of(name), seed,
                      index++);
  });
  return w;
}

template <typename Scalar>
void BlockWeights<Scalar>::validate(const ModelConfig& cfg) const {
  struct Shape {
    std::string name;
    Eigen::Index rows, cols;
  };
  std::vector<Shape> expected;
  zeros(cfg).for_each_tensor([&](const char* name, const Scalar*, Eigen::Index r, Eigen::Index c) {
    expected.push_back({name, r, c});
  });
  std::size_t i = 0;
  for_each_tensor([&](const char* name, const Scalar*, Eigen::Index r, Eigen::Index c) {
    if (expected[i].rows != r || expected[i].cols != c) {
      throw std::invalid_argument(std::string("block weights: tensor '") + name +
                                  "' has shape inconsistent with the model config");
    }
    ++i;
  });
}

template <typename Scalar>
template <typename Other>
BlockWeights<Other> BlockWeights<Scalar>::cast() const {
  BlockWeights<Other> o;
  o.ln1_gain = ln1_gain.template cast<Other>();
  o.ln1_bias = ln1_bias.template cast<Other>();
  o.qkv_weight = qkv_weight.template cast<Other>();
  o.qkv_bias = qkv_bias.template cast<Other>();
  o.out_weight = out_weight.template cast<Other>();
  o.out_bias = out_bias.template cast<Other>();
  o.ln2_gain = ln2_gain.template cast<Other>();
  o.ln2_bias = ln2_bias.template cast<Other>();
  o.up_weight = up_weight.template cast<Other>();
  o.up_bias = up_bias.template cast<Other>();
  o.down_weight = down_weight.template cast<Other>();
  o.down_bias = down_bias.template cast<Other>();
  return o;
}

// Weight manifest: JSON {"format": "neoxsim-weights", "version": 1,
// "dtype": "float32", "byte_order": "little", "tensors": [{"name", "shape",
// "offset"}]} next to a raw little-endian float32 blob.

void save_weights(const BlockWeights<double>& w, const std::filesystem::path& manifest,
                  const std::filesystem::path& blob);

BlockWeights<double> load_weights(const ModelConfig& cfg, const std::filesystem::path& manifest,
                                  const std::filesystem::path& blob);

struct WeightSource {
  BlockWeights<double> weights;
  bool synthesized = false;
  std::string notice;  // set when falling back to synthesis
};

/// Loads from the manifest/blob pair when both are given and the blob exists;
/// otherwise synthesizes from `seed` and explains why in `notice`.
WeightSource load_or_synthesize(const ModelConfig& cfg,
                                const std::optional<std::filesystem::path>& manifest,
                                const std::optional<std::filesystem::path>& blob,
                                std::uint64_t seed);

}  // namespace neoxsim

#endif  // NEOXSIM_WEIGHTS_HPP
