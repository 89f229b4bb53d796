// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_BLOCK_HPP
#define NEOXSIM_BLOCK_HPP

#include <stdexcept>
#include <string>

#include "neoxsim/attention.hpp"
#include "neoxsim/config.hpp"
#include "neoxsim/kv_cache.hpp"
#include "neoxsim/layers.hpp"
#include "neoxsim/rope.hpp"
#include "neoxsim/weights.hpp"

namespace neoxsim {

/// Applies partial RoPE to every head (row) of a [heads x d_head] matrix.
template <typename Scalar>
Matrix<Scalar> rope_heads(const Matrix<Scalar>& heads, std::size_t pos, const ModelConfig& cfg) {
  Matrix<Scalar> out(heads.rows(), heads.cols());
  for (Eigen::Index h = 0; h < heads.rows(); ++h) {
    out.row(h) =
        rope_partial(heads.row(h).transpose(), pos, cfg.rotary_dims(), cfg.rope_base).transpose();
  }
  return out;
}

/// Unfused reference decode step for one GPT-NeoX block:
///   LN1 -> QKV (+cache append) -> RoPE -> attention -> out proj + residual
///   -> LN2 -> MLP + residual
/// With parallel_residual, LN2 reads the block input and
/// y = x + attn(LN1(x)) + mlp(LN2(x)); otherwise h = x + attn and
/// y = h + mlp(LN2(h)).
template <typename Scalar>
Vector<Scalar> decoder_block_golden(const Vector<Scalar>& x, const BlockWeights<Scalar>& w,
                                    KVCache<Scalar>& cache, std::size_t pos,
                                    const ModelConfig& cfg) {
  if (cache.length() != pos) {
    throw std::invalid_argument("decoder block: cache holds " + std::to_string(cache.length()) +
                                " positions, expected " + std::to_string(pos));
  }
  if (x.size() != static_cast<Eigen::Index>(cfg.hidden)) {
    throw std::invalid_argument("decoder block: input size mismatch");
  }
  const auto eps = static_cast<Scalar>(cfg.ln_eps);
  const Vector<Scalar> a = layernorm_two_pass(x, w.ln1_gain, w.ln1_bias, eps);
  const auto qkv = qkv_project(a, w, cfg);
  const Matrix<Scalar> q = rope_heads(qkv.q, pos, cfg);
  const Matrix<Scalar> k = rope_heads(qkv.k, pos, cfg);
  cache.append(k, qkv.v);

  const auto d = static_cast<Eigen::Index>(cfg.d_head);
  const auto scale = static_cast<Scalar>(cfg.attention_scale());
  Vector<Scalar> context(static_cast<Eigen::Index>(cfg.hidden));
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const auto r = static_cast<Eigen::Index>(h);
    context.segment(r * d, d) = attend_naive(q.row(r).transpose(), cache.head(h), scale);
  }
  const Vector<Scalar> attn = w.out_weight * context + w.out_bias;

  if (cfg.parallel_residual) {
    const Vector<Scalar> m = layernorm_two_pass(x, w.ln2_gain, w.ln2_bias, eps);
    return x + attn + mlp(m, w, cfg.gelu);
  }
  const Vector<Scalar> h = x + attn;
  const Vector<Scalar> m = layernorm_two_pass(h, w.ln2_gain, w.ln2_bias, eps);
  return h + mlp(m, w, cfg.gelu);
}

}  // namespace neoxsim

#endif  // NEOXSIM_BLOCK_HPP
