// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_FLOPS_HPP
#define NEOXSIM_FLOPS_HPP

#include <cstddef>

#include "neoxsim/config.hpp"

namespace neoxsim {

// Dense-transformer FLOP counting: one multiply-accumulate is 2 FLOPs,
// embedding lookups are free, the unembedding matmul runs for every token.

/// Block parameters (weights, biases and LayerNorms) over all layers plus the
/// final LayerNorm.
double non_embedding_params(const ModelConfig& cfg);
double unembedding_params(const ModelConfig& cfg);

/// FLOPs for the token at `position` (number of tokens before it):
/// 2 * non-embedding params + 2 * unembedding params
/// + 4 * hidden * layers * position (scores and weighted values).
double token_flops(const ModelConfig& cfg, std::size_t position);

struct FlopsEstimate {
  double prefill = 0;
  double decode = 0;

  double total() const { return prefill + decode; }
};

/// Prefill covers positions [0, prompt_len); decode covers the next
/// decode_tokens positions.
FlopsEstimate flops(const ModelConfig& cfg, std::size_t prompt_len, std::size_t decode_tokens);

/// Prompt length whose prefill FLOPs are closest to `target_prefill`.
std::size_t calibrate_prompt_len(const ModelConfig& cfg, double target_prefill,
                                 std::size_t max_len = 4096);

}  // namespace neoxsim

#endif  // NEOXSIM_FLOPS_HPP
