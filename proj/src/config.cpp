// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/config.hpp"

#include <cmath>
#include <stdexcept>

namespace neoxsim {

std::string to_string(GeluKind g) { return g == GeluKind::Exact ? "exact" : "tanh"; }

GeluKind parse_gelu(const std::string& s) {
  if (s == "exact") return GeluKind::Exact;
  if (s == "tanh") return GeluKind::Tanh;
  throw std::invalid_argument("unknown gelu variant '" + s + "' (expected exact|tanh)");
}

std::size_t ModelConfig::rotary_dims() const {
  return static_cast<std::size_t>(std::floor(rotary_pct * static_cast<double>(d_head)));
}

double ModelConfig::attention_scale() const {
  return 1.0 / std::sqrt(static_cast<double>(d_head));
}

void ModelConfig::validate() const {
  auto fail = [this](const std::string& what) {
    throw std::invalid_argument("model config '" + name + "': " + what);
  };
  if (hidden == 0 || n_heads == 0 || d_head == 0 || n_layers == 0 || d_mlp == 0 ||
      vocab == 0) {
    fail("all counts must be >= 1");
  }
  if (hidden != n_heads * d_head) fail("hidden must equal n_heads * d_head");
  if (!(rotary_pct > 0.0 && rotary_pct <= 1.0)) fail("rotary_pct must be in (0, 1]");
  const auto rd = rotary_dims();
  if (rd < 2 || rd % 2 != 0) fail("rotary dims must be even and >= 2");
  if (!(ln_eps >= 0.0)) fail("ln_eps must be >= 0");
  if (!(rope_base > 0.0)) fail("rope_base must be > 0");
}

ModelConfig preset(std::string_view name) {
  ModelConfig cfg;
  if (name == "pythia-2.8b") {
    cfg.name = "pythia-2.8b";
    cfg.hidden = 2560;
    cfg.n_heads = 32;
    cfg.d_head = 80;
    cfg.n_layers = 32;
    cfg.d_mlp = 10240;
    cfg.rotary_pct = 0.25;
    cfg.vocab = 50304;
  } else if (name == "pythia-6.9b") {
    // Public architecture values.
    cfg.name = "pythia-6.9b";
    cfg.hidden = 4096;
    cfg.n_heads = 32;
    cfg.d_head = 128;
    cfg.n_layers = 32;
    cfg.d_mlp = 16384;
    cfg.rotary_pct = 0.25;
    cfg.vocab = 50432;
  } else if (name == "tiny") {
    cfg.name = "tiny";
    cfg.hidden = 8;
    cfg.n_heads = 2;
    cfg.d_head = 4;
    cfg.n_layers = 2;
    cfg.d_mlp = 16;
    cfg.rotary_pct = 0.5;
    cfg.vocab = 32;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> preset_names() { return {"pythia-2.8b", "pythia-6.9b", "tiny"}; }

}  // namespace neoxsim
