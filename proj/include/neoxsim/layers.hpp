// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_LAYERS_HPP
#define NEOXSIM_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "neoxsim/config.hpp"
#include "neoxsim/tensor.hpp"
#include "neoxsim/weights.hpp"

namespace neoxsim {

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x) {
  if (!x.allFinite()) throw std::domain_error("non-finite activation");
}

template <typename A, typename B>
void require_same_size(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                       const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

}  // namespace detail

/// LayerNorm with mean and population variance in two dedicated passes.
template <typename Derived, typename G, typename B>
Vector<typename Derived::Scalar> layernorm_two_pass(const Eigen::MatrixBase<Derived>& x,
                                                    const Eigen::MatrixBase<G>& gain,
                                                    const Eigen::MatrixBase<B>& bias,
                                                    typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw std::invalid_argument("layernorm: empty input");
  detail::require_same_size(x, gain, "layernorm gain");
  detail::require_same_size(x, bias, "layernorm bias");
  detail::require_finite(x);
  const auto n = static_cast<Scalar>(x.size());
  const Scalar mean = x.sum() / n;
  const Vector<Scalar> centered = x.array() - mean;
  const Scalar var = centered.squaredNorm() / n;
  const Scalar inv_std = Scalar(1) / std::sqrt(var + eps);
  return (centered.array() * inv_std * gain.array() + bias.array()).matrix();
}

/// LayerNorm with sum and sum of squares gathered in one sweep,
/// Var = E[x^2] - E[x]^2, clamped at zero.
template <typename Derived, typename G, typename B>
Vector<typename Derived::Scalar> layernorm_single_pass(const Eigen::MatrixBase<Derived>& x,
                                                       const Eigen::MatrixBase<G>& gain,
                                                       const Eigen::MatrixBase<B>& bias,
                                                       typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw std::invalid_argument("layernorm: empty input");
  detail::require_same_size(x, gain, "layernorm gain");
  detail::require_same_size(x, bias, "layernorm bias");
  detail::require_finite(x);
  Scalar sum = 0;
  Scalar sum_sq = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar v = x(i);
    sum += v;
    sum_sq += v * v;
  }
  const auto n = static_cast<Scalar>(x.size());
  const Scalar mean = sum / n;
  const Scalar var = std::max(Scalar(0), sum_sq / n - mean * mean);
  const Scalar inv_std = Scalar(1) / std::sqrt(var + eps);
  return ((x.array() - mean) * inv_std * gain.array() + bias.array()).matrix();
}

template <typename Scalar>
Scalar gelu_exact(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_tanh(Scalar x) {
  const Scalar k = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(k * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu(Scalar x, GeluKind kind) {
  return kind == GeluKind::Exact ? gelu_exact(x) : gelu_tanh(x);
}

/// Per-head projections; row h of each matrix is head h.
template <typename Scalar>
struct QkvHeads {
  Matrix<Scalar> q;
  Matrix<Scalar> k;
  Matrix<Scalar> v;
};

/// QKV projection over the interleaved per-head layout: rows
/// [h*3*d_head, (h+1)*3*d_head) of the weight hold head h's Q, K and V rows.
template <typename Derived>
QkvHeads<typename Derived::Scalar> qkv_project(const Eigen::MatrixBase<Derived>& x_normed,
                                               const BlockWeights<typename Derived::Scalar>& w,
                                               const ModelConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  const auto hidden = static_cast<Eigen::Index>(cfg.hidden);
  const auto d = static_cast<Eigen::Index>(cfg.d_head);
  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  if (w.qkv_weight.rows() != 3 * hidden || w.qkv_weight.cols() != hidden ||
      w.qkv_bias.size() != 3 * hidden || x_normed.size() != hidden) {
    throw std::invalid_argument("qkv_project: layout/dimension mismatch");
  }
  const Vector<Scalar> y = w.qkv_weight * x_normed + w.qkv_bias;
  QkvHeads<Scalar> out{Matrix<Scalar>(heads, d), Matrix<Scalar>(heads, d),
                       Matrix<Scalar>(heads, d)};
  for (Eigen::Index h = 0; h < heads; ++h) {
    out.q.row(h) = y.segment(h * 3 * d, d).transpose();
    out.k.row(h) = y.segment(h * 3 * d + d, d).transpose();
    out.v.row(h) = y.segment(h * 3 * d + 2 * d, d).transpose();
  }
  return out;
}

/// down(gelu(up(x) + b_up)) + b_down
template <typename Derived>
Vector<typename Derived::Scalar> mlp(const Eigen::MatrixBase<Derived>& x_normed,
                                     const BlockWeights<typename Derived::Scalar>& w,
                                     GeluKind kind) {
  using Scalar = typename Derived::Scalar;
  if (w.up_weight.cols() != x_normed.size() || w.down_weight.cols() != w.up_weight.rows() ||
      w.up_bias.size() != w.up_weight.rows() || w.down_bias.size() != w.down_weight.rows()) {
    throw std::invalid_argument("mlp: dimension mismatch");
  }
  const Vector<Scalar> up = w.up_weight * x_normed + w.up_bias;
  const Vector<Scalar> act = up.unaryExpr([kind](Scalar v) { return gelu(v, kind); });
  return w.down_weight * act + w.down_bias;
}

}  // namespace neoxsim

#endif  // NEOXSIM_LAYERS_HPP
