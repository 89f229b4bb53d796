// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_KV_CACHE_HPP
#define NEOXSIM_KV_CACHE_HPP

#include <stdexcept>
#include <vector>

#include "neoxsim/tensor.hpp"

namespace neoxsim {

/// Read-only view of one head's cached keys and values, [len x d_head].
template <typename Scalar>
struct HeadCache {
  Eigen::Map<const Matrix<Scalar>> keys;
  Eigen::Map<const Matrix<Scalar>> values;

  Eigen::Index length() const { return keys.rows(); }
};

/// Append-only key/value history for all heads of one block. Keys are stored
/// after RoPE.
template <typename Scalar>
class KVCache {
 public:
  KVCache(std::size_t n_heads, std::size_t d_head)
      : d_head_(d_head), keys_(n_heads), values_(n_heads) {}

  std::size_t n_heads() const { return keys_.size(); }
  std::size_t d_head() const { return d_head_; }
  std::size_t length() const { return len_; }

  /// Appends one position; row h of k/v belongs to head h.
  void append(const Matrix<Scalar>& k, const Matrix<Scalar>& v) {
    const auto heads = static_cast<Eigen::Index>(n_heads());
    const auto d = static_cast<Eigen::Index>(d_head_);
    if (k.rows() != heads || v.rows() != heads || k.cols() != d || v.cols() != d) {
      throw std::invalid_argument("kv cache: append shape mismatch");
    }
    for (std::size_t h = 0; h < n_heads(); ++h) {
      const auto r = static_cast<Eigen::Index>(h);
      keys_[h].insert(keys_[h].end(), k.row(r).data(), k.row(r).data() + d);
      values_[h].insert(values_[h].end(), v.row(r).data(), v.row(r).data() + d);
    }
    ++len_;
  }

  HeadCache<Scalar> head(std::size_t h) const {
    const auto rows = static_cast<Eigen::Index>(len_);
    const auto d = static_cast<Eigen::Index>(d_head_);
    return {Eigen::Map<const Matrix<Scalar>>(keys_.at(h).data(), rows, d),
            Eigen::Map<const Matrix<Scalar>>(values_.at(h).data(), rows, d)};
  }

  friend bool operator==(const KVCache&, const KVCache&) = default;

 private:
  std::size_t d_head_;
  std::size_t len_ = 0;
  std::vector<std::vector<Scalar>> keys_;
  std::vector<std::vector<Scalar>> values_;
};

}  // namespace neoxsim

#endif  // NEOXSIM_KV_CACHE_HPP
