// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/prng.hpp"

#include <numeric>
#include <utility>

namespace neoxsim {

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i-- > 1;) {
    std::swap(p[i], p[rng.bounded(i + 1)]);
  }
  return p;
}

}  // namespace neoxsim
