// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_VERIFY_HPP
#define NEOXSIM_VERIFY_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace neoxsim {

/// Oracle-equivalence suites run by `neoxsim verify`:
///   split      split-KV attention vs single-pass softmax attention
///   layernorm  single-pass vs two-pass LayerNorm, random and large-mean
///   rope       inverse, norm preservation, pass-through dimensions
///   prefill    tiled causal prefill vs per-row attention
///   reduction  schedule depths and cross-strategy exactness
///   block      cluster-simulated block vs golden block, exact accumulation
std::vector<std::string> verify_suite_names();

struct VerifyOptions {
  std::vector<std::string> suites;  // empty selects nothing
  std::uint64_t seed = 0;
  /// Test hook: names a suite whose first candidate output gets an additive
  /// perturbation of max(1e-6, 4 * tolerance) before comparison. Empty
  /// disables it.
  std::string fault;
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t checks = 0;
  double worst_ratio = 0;  // max over checks of error / tolerance
  std::string detail;
  double seconds = 0;
};

/// Throws std::invalid_argument "no suites selected" when options.suites is
/// empty, and on unknown suite or fault names.
std::vector<SuiteResult> run_verify(const VerifyOptions& options);

}  // namespace neoxsim

#endif  // NEOXSIM_VERIFY_HPP
