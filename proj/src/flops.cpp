// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/flops.hpp"

#include <cmath>

namespace neoxsim {

double non_embedding_params(const ModelConfig& cfg) {
  const auto h = static_cast<double>(cfg.hidden);
  const auto m = static_cast<double>(cfg.d_mlp);
  const double per_layer = (3 * h * h + 3 * h)  // qkv
                           + (h * h + h)        // out
                           + (m * h + m)        // up
                           + (h * m + h)        // down
                           + 4 * h;             // two LayerNorms
  return static_cast<double>(cfg.n_layers) * per_layer + 2 * h;
}

double unembedding_params(const ModelConfig& cfg) {
  return static_cast<double>(cfg.vocab) * static_cast<double>(cfg.hidden);
}

double token_flops(const ModelConfig& cfg, std::size_t position) {
  return 2 * non_embedding_params(cfg) + 2 * unembedding_params(cfg) +
         4 * static_cast<double>(cfg.hidden) * static_cast<double>(cfg.n_layers) *
             static_cast<double>(position);
}

namespace {

// Sum of token_flops over positions [first, first + count), closed form.
double span_flops(const ModelConfig& cfg, std::size_t first, std::size_t count) {
  const auto n = static_cast<double>(count);
  const auto f = static_cast<double>(first);
  const double fixed = 2 * non_embedding_params(cfg) + 2 * unembedding_params(cfg);
  const double position_sum = n * f + n * (n - 1) / 2;
  return n * fixed +
         4 * static_cast<double>(cfg.hidden) * static_cast<double>(cfg.n_layers) * position_sum;
}

}  // namespace

FlopsEstimate flops(const ModelConfig& cfg, std::size_t prompt_len, std::size_t decode_tokens) {
  return {span_flops(cfg, 0, prompt_len), span_flops(cfg, prompt_len, decode_tokens)};
}

std::size_t calibrate_prompt_len(const ModelConfig& cfg, double target_prefill,
                                 std::size_t max_len) {
  std::size_t best = 0;
  double best_err = std::fabs(target_prefill);
  for (std::size_t p = 1; p <= max_len; ++p) {
    const double err = std::fabs(span_flops(cfg, 0, p) - target_prefill);
    if (err < best_err) {
      best = p;
      best_err = err;
    }
  }
  return best;
}

}  // namespace neoxsim
