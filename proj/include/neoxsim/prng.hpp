// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_PRNG_HPP
#define NEOXSIM_PRNG_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace neoxsim {

// All randomness in the project comes from SplitMix64 so that permutations and
// synthetic weights are identical across hosts and reimplementations:
//
//   mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//            z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//            return z ^ (z >> 31)
//   stream:  state += 0x9E3779B97F4A7C15; return mix(state)
//
// uniform() takes the top 53 bits; bounded(n) uses the 128-bit multiply-high
// reduction floor(x * n / 2^64).

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += kGoldenGamma;
    return splitmix64_mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

// Derives a sub-seed from a seed and a list of keys: s = mix(s ^ mix(k + gamma))
// folded over the keys.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = seed;
  for (std::uint64_t k : keys) s = splitmix64_mix(s ^ splitmix64_mix(k + kGoldenGamma));
  return s;
}

// Fisher-Yates: for i = n-1 down to 1, swap(p[i], p[bounded(i + 1)]), drawing
// from a SplitMix64 stream seeded with `seed`.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace neoxsim

#endif  // NEOXSIM_PRNG_HPP
