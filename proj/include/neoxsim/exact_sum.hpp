// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_EXACT_SUM_HPP
#define NEOXSIM_EXACT_SUM_HPP

#include <span>
#include <vector>

namespace neoxsim {

// Error-free accumulator. Keeps the running sum as a non-overlapping expansion
// of doubles (Shewchuk partials), so the represented value is the exact real
// sum of everything added so far; value() rounds it once, correctly.
// The result is therefore independent of the order of add()/merge() calls.
class ExactSum {
 public:
  ExactSum() = default;
  explicit ExactSum(double x) { add(x); }

  void add(double x);
  void merge(const ExactSum& other);

  // Correctly rounded (to nearest even) double value of the exact sum.
  double value() const;

  const std::vector<double>& partials() const { return partials_; }

 private:
  std::vector<double> partials_;
  double special_ = 0.0;  // sum of non-finite inputs
  bool has_special_ = false;
};

double exact_sum(std::span<const double> values);

}  // namespace neoxsim

#endif  // NEOXSIM_EXACT_SUM_HPP
