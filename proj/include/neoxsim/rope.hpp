// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_ROPE_HPP
#define NEOXSIM_ROPE_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "neoxsim/tensor.hpp"

namespace neoxsim {

namespace detail {

template <typename Derived>
Vector<typename Derived::Scalar> rotate_half_split(const Eigen::MatrixBase<Derived>& v,
                                                   double signed_pos, std::size_t rotary_dims,
                                                   double theta_base) {
  using Scalar = typename Derived::Scalar;
  if (rotary_dims % 2 != 0) throw std::invalid_argument("rope: rotary_dims must be even");
  if (static_cast<Eigen::Index>(rotary_dims) > v.size()) {
    throw std::invalid_argument("rope: rotary_dims exceeds head dimension");
  }
  Vector<Scalar> out = v;
  const std::size_t half = rotary_dims / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double inv_freq =
        std::pow(theta_base, -2.0 * static_cast<double>(i) / static_cast<double>(rotary_dims));
    const double angle = signed_pos * inv_freq;
    const auto c = static_cast<Scalar>(std::cos(angle));
    const auto s = static_cast<Scalar>(std::sin(angle));
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(i + half);
    const Scalar x0 = v(a);
    const Scalar x1 = v(b);
    out(a) = x0 * c - x1 * s;
    out(b) = x1 * c + x0 * s;
  }
  return out;
}

}  // namespace detail

/// Partial rotary embedding, GPT-NeoX half-split pairing: dims i and
/// i + rotary_dims/2 rotate by pos * theta_base^(-2i/rotary_dims); dims from
/// rotary_dims on are copied through untouched.
template <typename Derived>
Vector<typename Derived::Scalar> rope_partial(const Eigen::MatrixBase<Derived>& v,
                                              std::size_t pos, std::size_t rotary_dims,
                                              double theta_base = 10000.0) {
  return detail::rotate_half_split(v, static_cast<double>(pos), rotary_dims, theta_base);
}

template <typename Derived>
Vector<typename Derived::Scalar> rope_partial_inverse(const Eigen::MatrixBase<Derived>& v,
                                                      std::size_t pos, std::size_t rotary_dims,
                                                      double theta_base = 10000.0) {
  return detail::rotate_half_split(v, -static_cast<double>(pos), rotary_dims, theta_base);
}

}  // namespace neoxsim

#endif  // NEOXSIM_ROPE_HPP
