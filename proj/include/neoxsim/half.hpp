// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_HALF_HPP
#define NEOXSIM_HALF_HPP

#include <cstdint>

namespace neoxsim {

/// IEEE 754 binary16 value, emulated in software so results are bit-identical
/// on every host. Arithmetic goes through double, which represents every
/// binary16 value and every sum of two of them exactly, so `a + b` below is a
/// correctly rounded half-precision add.
class Half {
 public:
  constexpr Half() = default;

  static constexpr Half from_bits(std::uint16_t bits) {
    Half h;
    h.bits_ = bits;
    return h;
  }

  /// Round to nearest, ties to even. Overflow goes to +/-inf, NaN becomes the
  /// canonical quiet NaN 0x7E00.
  static Half round(double x);

  constexpr std::uint16_t bits() const { return bits_; }
  double to_double() const;

  constexpr bool is_nan() const {
    return (bits_ & 0x7C00u) == 0x7C00u && (bits_ & 0x03FFu) != 0;
  }
  constexpr bool is_inf() const { return (bits_ & 0x7FFFu) == 0x7C00u; }

  friend constexpr bool operator==(Half a, Half b) { return a.bits_ == b.bits_; }

  friend Half operator+(Half a, Half b) {
    return Half::round(a.to_double() + b.to_double());
  }

 private:
  std::uint16_t bits_ = 0;
};

inline Half half_round(double x) { return Half::round(x); }

/// Round-trip through binary16.
inline double round_to_half(double x) { return Half::round(x).to_double(); }

/// Spacing between adjacent binary16 values at magnitude |x| (the subnormal
/// spacing 2^-24 below the normal range).
double ulp16(double x);

inline constexpr double kHalfMax = 65504.0;

}  // namespace neoxsim

#endif  // NEOXSIM_HALF_HPP
