// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_ATTENTION_HPP
#define NEOXSIM_ATTENTION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "neoxsim/kv_cache.hpp"
#include "neoxsim/tensor.hpp"

namespace neoxsim {

/// Partial softmax over a slice of the sequence: running max m, normalizer
/// l = sum exp(s_i - m) and unnormalized output o = sum exp(s_i - m) v_i.
/// An empty state has l == 0 and m == -inf.
template <typename Scalar>
struct SoftmaxState {
  Scalar m = -std::numeric_limits<Scalar>::infinity();
  Scalar l = 0;
  Vector<Scalar> o;

  static SoftmaxState empty(Eigen::Index d) { return {-std::numeric_limits<Scalar>::infinity(), 0, Vector<Scalar>::Zero(d)}; }

  bool is_empty() const { return l == Scalar(0); }

  Vector<Scalar> finalize() const {
    if (is_empty()) throw std::logic_error("softmax state: finalize on empty state");
    return o / l;
  }
};

/// Log-sum-exp merge: rescale both sides to the larger max.
template <typename Scalar>
SoftmaxState<Scalar> merge(const SoftmaxState<Scalar>& a, const SoftmaxState<Scalar>& b) {
  if (a.is_empty()) return b;
  if (b.is_empty()) return a;
  const Scalar m = std::max(a.m, b.m);
  const Scalar ca = std::exp(a.m - m);
  const Scalar cb = std::exp(b.m - m);
  return {m, a.l * ca + b.l * cb, a.o * ca + b.o * cb};
}

/// State for rows [begin, end) of the cache. The block first finds its local
/// max, then accumulates, in the same arithmetic as attend_naive.
template <typename QDerived>
SoftmaxState<typename QDerived::Scalar> softmax_state(
    const Eigen::MatrixBase<QDerived>& q, const MatrixCRef<typename QDerived::Scalar>& keys,
    const MatrixCRef<typename QDerived::Scalar>& values, Eigen::Index begin, Eigen::Index end,
    typename QDerived::Scalar scale) {
  using Scalar = typename QDerived::Scalar;
  if (begin >= end) return SoftmaxState<Scalar>::empty(values.cols());
  const Eigen::Index n = end - begin;
  const Vector<Scalar> logits = (keys.middleRows(begin, n) * q) * scale;
  const Scalar m = logits.maxCoeff();
  const Vector<Scalar> w = (logits.array() - m).exp().matrix();
  return {m, w.sum(), values.middleRows(begin, n).transpose() * w};
}

/// softmax(q K^T scale) V over the whole cache, max-subtracted.
template <typename QDerived>
Vector<typename QDerived::Scalar> attend_naive(const Eigen::MatrixBase<QDerived>& q,
                                               const MatrixCRef<typename QDerived::Scalar>& keys,
                                               const MatrixCRef<typename QDerived::Scalar>& values,
                                               typename QDerived::Scalar scale) {
  using Scalar = typename QDerived::Scalar;
  if (keys.rows() == 0) throw std::invalid_argument("attend: empty cache");
  if (keys.rows() != values.rows() || keys.cols() != q.size()) {
    throw std::invalid_argument("attend: dimension mismatch");
  }
  const Vector<Scalar> logits = (keys * q) * scale;
  const Scalar m = logits.maxCoeff();
  const Vector<Scalar> w = (logits.array() - m).exp().matrix();
  const Scalar l = w.sum();
  const Vector<Scalar> o = values.transpose() * w;
  return o / l;
}

template <typename QDerived>
Vector<typename QDerived::Scalar> attend_naive(const Eigen::MatrixBase<QDerived>& q,
                                               const HeadCache<typename QDerived::Scalar>& head,
                                               typename QDerived::Scalar scale) {
  return attend_naive(q, MatrixCRef<typename QDerived::Scalar>(head.keys),
                      MatrixCRef<typename QDerived::Scalar>(head.values), scale);
}

/// Prefill attention computed key-tile by key-tile with SoftmaxState merging.
/// Row i attends to keys [0, i] when causal, all keys otherwise. Scale is
/// 1/sqrt(d_head).
template <typename Scalar>
Matrix<Scalar> prefill_attention_tiled(const MatrixCRef<Scalar>& q, const MatrixCRef<Scalar>& k,
                                       const MatrixCRef<Scalar>& v, Eigen::Index tile,
                                       bool causal) {
  if (tile < 1) throw std::invalid_argument("prefill: tile must be >= 1");
  if (q.rows() < 1) throw std::invalid_argument("prefill: seq must be >= 1");
  if (k.rows() != q.rows() || v.rows() != q.rows() || k.cols() != q.cols()) {
    throw std::invalid_argument("prefill: dimension mismatch");
  }
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  Matrix<Scalar> out(q.rows(), v.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const Eigen::Index limit = causal ? i + 1 : k.rows();
    const Vector<Scalar> qi = q.row(i).transpose();
    auto state = SoftmaxState<Scalar>::empty(v.cols());
    for (Eigen::Index t = 0; t < limit; t += tile) {
      state = merge(state, softmax_state(qi, k, v, t, std::min(t + tile, limit), scale));
    }
    out.row(i) = state.finalize().transpose();
  }
  return out;
}

}  // namespace neoxsim

#endif  // NEOXSIM_ATTENTION_HPP
