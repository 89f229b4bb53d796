// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/half.hpp"

#include <cmath>

namespace neoxsim {

Half Half::round(double x) {
  if (std::isnan(x)) return from_bits(0x7E00u);
  const std::uint16_t sign = std::signbit(x) ? 0x8000u : 0u;
  const double a = std::fabs(x);
  if (std::isinf(a)) return from_bits(sign | 0x7C00u);
  if (a == 0.0) return from_bits(sign);

  int exp2 = 0;
  std::frexp(a, &exp2);  // a = m * 2^exp2, m in [0.5, 1)
  int e = exp2 - 1;      // a in [2^e, 2^(e+1))
  const bool subnormal = e < -14;
  const int quantum_exp = subnormal ? -24 : e - 10;

  // Scaling by a power of two is exact; nearbyint uses the default
  // round-to-nearest-even mode.
  double q = std::nearbyint(std::ldexp(a, -quantum_exp));

  if (subnormal) {
    // q in [0, 1024]; q == 1024 is exactly the smallest normal (0x0400).
    return from_bits(sign | static_cast<std::uint16_t>(q));
  }
  if (q == 2048.0) {
    q = 1024.0;
    ++e;
  }
  const int biased = e + 15;
  if (biased >= 31) return from_bits(sign | 0x7C00u);
  return from_bits(sign | static_cast<std::uint16_t>(biased << 10) |
                   static_cast<std::uint16_t>(q - 1024.0));
}

double Half::to_double() const {
  const unsigned exp = (bits_ >> 10) & 0x1Fu;
  const unsigned man = bits_ & 0x3FFu;
  const double sign = (bits_ & 0x8000u) ? -1.0 : 1.0;
  if (exp == 0) return sign * std::ldexp(static_cast<double>(man), -24);
  if (exp == 31) {
    return man == 0 ? sign * INFINITY : std::nan("");
  }
  return sign * std::ldexp(static_cast<double>(1024u + man),
                           static_cast<int>(exp) - 25);
}

double ulp16(double x) {
  const double a = std::fabs(x);
  if (!(a >= std::ldexp(1.0, -14))) return std::ldexp(1.0, -24);
  int exp2 = 0;
  std::frexp(std::fmin(a, kHalfMax), &exp2);
  return std::ldexp(1.0, exp2 - 1 - 10);
}

}  // namespace neoxsim
