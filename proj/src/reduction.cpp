// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/reduction.hpp"

#include <stdexcept>

#include "neoxsim/exact_sum.hpp"
#include "neoxsim/half.hpp"
#include "neoxsim/prng.hpp"

namespace neoxsim {

std::string to_string(Precision p) { return p == Precision::Exact ? "exact" : "fp16"; }

Precision parse_precision(const std::string& s) {
  if (s == "exact") return Precision::Exact;
  if (s == "fp16") return Precision::Fp16;
  throw std::invalid_argument("unknown precision '" + s + "' (expected exact|fp16)");
}

std::string to_string(const ReductionStrategy& s) {
  switch (s.kind) {
    case ReductionStrategy::Kind::Ring: return "ring";
    case ReductionStrategy::Kind::Tree: return "tree";
    case ReductionStrategy::Kind::PermutedAtomic:
      return "permuted(" + std::to_string(s.seed) + ")";
  }
  return "?";
}

std::size_t ceil_log2(std::size_t n) {
  std::size_t levels = 0;
  for (std::size_t span = 1; span < n; span <<= 1) ++levels;
  return levels;
}

ReductionSchedule reduction_schedule(std::size_t n, const ReductionStrategy& strategy) {
  if (n == 0) throw std::invalid_argument("empty reduction");
  ReductionSchedule schedule;
  switch (strategy.kind) {
    case ReductionStrategy::Kind::Ring:
      for (std::size_t i = 1; i < n; ++i) schedule.levels.push_back({{0, i}});
      break;
    case ReductionStrategy::Kind::Tree:
      for (std::size_t stride = 1; stride < n; stride <<= 1) {
        std::vector<Combine> level;
        for (std::size_t i = 0; i + stride < n; i += 2 * stride) {
          level.push_back({i, i + stride});
        }
        schedule.levels.push_back(std::move(level));
      }
      break;
    case ReductionStrategy::Kind::PermutedAtomic: {
      const auto perm = seeded_permutation(n, strategy.seed);
      schedule.root = perm[0];
      for (std::size_t i = 1; i < n; ++i) schedule.levels.push_back({{perm[0], perm[i]}});
      break;
    }
  }
  return schedule;
}

ReduceResult reduce(std::span<const Eigen::VectorXd> values,
                    const ReductionStrategy& strategy, Precision precision) {
  if (values.empty()) throw std::invalid_argument("empty reduction");
  const auto len = values.front().size();
  for (const auto& v : values) {
    if (v.size() != len) throw std::invalid_argument("reduce: vector length mismatch");
  }
  const auto schedule = reduction_schedule(values.size(), strategy);
  ReduceResult result;
  result.steps = schedule.steps();
  result.sum.resize(len);

  if (precision == Precision::Exact) {
    std::vector<ExactSum> slots(values.size());
    for (Eigen::Index e = 0; e < len; ++e) {
      for (std::size_t i = 0; i < values.size(); ++i) slots[i] = ExactSum(values[i][e]);
      for (const auto& level : schedule.levels) {
        for (const auto& c : level) slots[c.dst].merge(slots[c.src]);
      }
      result.sum[e] = slots[schedule.root].value();
    }
    return result;
  }

  std::vector<Eigen::VectorXd> slots;
  slots.reserve(values.size());
  for (const auto& v : values) slots.push_back(v.unaryExpr(&round_to_half));
  for (const auto& level : schedule.levels) {
    for (const auto& c : level) {
      slots[c.dst] = (slots[c.dst] + slots[c.src]).unaryExpr(&round_to_half);
    }
  }
  result.sum = std::move(slots[schedule.root]);
  return result;
}

double atomic_accumulate(double init, std::span<const double> contributions,
                         std::uint64_t seed, Precision precision) {
  if (precision == Precision::Exact) {
    ExactSum acc(init);
    for (double c : contributions) acc.add(c);
    return acc.value();
  }
  Half acc = Half::round(init);
  for (std::size_t idx : seeded_permutation(contributions.size(), seed)) {
    acc = acc + Half::round(contributions[idx]);
  }
  return acc.to_double();
}

double permuted_sum(std::span<const double> values, std::uint64_t seed,
                    Precision precision) {
  if (values.empty()) throw std::invalid_argument("empty reduction");
  if (precision == Precision::Exact) return exact_sum(values);
  const auto perm = seeded_permutation(values.size(), seed);
  Half acc = Half::round(values[perm[0]]);
  for (std::size_t i = 1; i < perm.size(); ++i) acc = acc + Half::round(values[perm[i]]);
  return acc.to_double();
}

}  // namespace neoxsim
