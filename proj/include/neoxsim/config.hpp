// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_CONFIG_HPP
#define NEOXSIM_CONFIG_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace neoxsim {

enum class GeluKind { Exact, Tanh };

std::string to_string(GeluKind g);
GeluKind parse_gelu(const std::string& s);

/// GPT-NeoX architectural hyperparameters.
struct ModelConfig {
  std::string name = "custom";
  std::size_t hidden = 0;
  std::size_t n_heads = 0;
  std::size_t d_head = 0;
  std::size_t n_layers = 0;
  std::size_t d_mlp = 0;
  double rotary_pct = 0.25;
  double ln_eps = 1e-5;
  std::size_t vocab = 0;
  bool parallel_residual = true;
  double rope_base = 10000.0;
  GeluKind gelu = GeluKind::Exact;

  /// floor(rotary_pct * d_head).
  std::size_t rotary_dims() const;
  double attention_scale() const;

  /// Throws std::invalid_argument on the first violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Known presets: "pythia-2.8b", "pythia-6.9b", "tiny".
ModelConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace neoxsim

#endif  // NEOXSIM_CONFIG_HPP
