// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_REDUCTION_HPP
#define NEOXSIM_REDUCTION_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace neoxsim {

enum class Precision { Exact, Fp16 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

struct ReductionStrategy {
  enum class Kind { Ring, Tree, PermutedAtomic };

  Kind kind = Kind::Ring;
  std::uint64_t seed = 0;  // PermutedAtomic only

  static constexpr ReductionStrategy ring() { return {Kind::Ring, 0}; }
  static constexpr ReductionStrategy tree() { return {Kind::Tree, 0}; }
  static constexpr ReductionStrategy permuted_atomic(std::uint64_t seed) {
    return {Kind::PermutedAtomic, seed};
  }

  friend bool operator==(const ReductionStrategy&, const ReductionStrategy&) = default;
};

std::string to_string(const ReductionStrategy& s);

/// One combine: slot `dst` <- combine(slot `dst`, slot `src`).
struct Combine {
  std::size_t dst;
  std::size_t src;
};

/// Combine order for n operands, grouped into levels. Combines within a level
/// touch disjoint slots and could run in parallel; the number of levels is the
/// synchronization step count.
///   Ring:           n-1 levels, (0 <- i) for i = 1..n-1
///   Tree:           ceil(log2 n) levels, stride doubling, (i <- i + s)
///   PermutedAtomic: n-1 levels following the seeded permutation
struct ReductionSchedule {
  std::vector<std::vector<Combine>> levels;
  std::size_t root = 0;

  std::size_t steps() const { return levels.size(); }
};

ReductionSchedule reduction_schedule(std::size_t n, const ReductionStrategy& strategy);

std::size_t ceil_log2(std::size_t n);

struct ReduceResult {
  Eigen::VectorXd sum;
  std::size_t steps = 0;
};

/// Elementwise sum of equal-length vectors in the order the strategy dictates.
/// Fp16 rounds every operand on entry and every combine result; Exact carries
/// error-free expansions through the schedule and rounds once at the end, so
/// all strategies agree bit for bit.
ReduceResult reduce(std::span<const Eigen::VectorXd> values,
                    const ReductionStrategy& strategy, Precision precision);

/// Sums scalars in the order of the seed-keyed permutation.
double permuted_sum(std::span<const double> values, std::uint64_t seed,
                    Precision precision);

/// Atomic-add model: a buffer holding `init` receives `contributions` in
/// seeded permuted order. In Fp16 the buffer, each contribution and each
/// add are rounded to binary16.
double atomic_accumulate(double init, std::span<const double> contributions,
                         std::uint64_t seed, Precision precision);

}  // namespace neoxsim

#endif  // NEOXSIM_REDUCTION_HPP
