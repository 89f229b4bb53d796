// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_FIDELITY_HPP
#define NEOXSIM_FIDELITY_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "neoxsim/cluster.hpp"
#include "neoxsim/config.hpp"
#include "neoxsim/plan.hpp"
#include "neoxsim/tensor.hpp"
#include "neoxsim/weights.hpp"

namespace neoxsim {

struct FidelityReport {
  double token_match_rate = 1.0;
  double logits_mae = 0.0;
  std::map<std::size_t, double> topk_agreement;
  std::size_t n_trials = 0;  // positions compared

  friend bool operator==(const FidelityReport&, const FidelityReport&) = default;
};

/// Argmax per step; ties go to the lowest index.
std::vector<std::size_t> greedy_tokens(std::span<const VectorXd> logits);

/// Indices of the k largest entries (ties to the lower index), ascending.
std::vector<std::size_t> top_k(const VectorXd& logits, std::size_t k);

/// Top-k sets are compared unordered. Throws std::invalid_argument on a
/// sequence-length or vocabulary mismatch.
FidelityReport compare(std::span<const VectorXd> golden, std::span<const VectorXd> variant,
                       std::span<const std::size_t> ks = std::span<const std::size_t>{});

/// A single decoder block followed by a synthetic unembedding to a small
/// vocabulary, driven for `inputs.size()` decode steps from an empty cache.
struct FidelityInstance {
  ModelConfig cfg;
  BlockWeights<double> weights;
  MatrixXd unembed;       // [vocab x hidden]
  VectorXd unembed_bias;  // [vocab]
  std::vector<VectorXd> inputs;
  ClusterSpec spec;
  FusionPlan plan = FusionPlan::fused(true);

  /// Seeded weights, inputs and unembedding for `cfg`.
  static FidelityInstance random(const ModelConfig& cfg, std::uint64_t seed, std::size_t steps,
                                 std::size_t vocab, const ClusterSpec& spec);

  /// Tiny preset with zero weights and inputs. Head 0 values carry
  /// [1, 2^-11, 2^-11, 0]; output row 0 sums them, so in binary16 the result
  /// is 1 + 2^-10 only when both small terms are accumulated before the 1.
  /// Logit 0 is that output and logit 1 sits at 1 + 2^-11 between the two
  /// outcomes.
  static FidelityInstance adversarial(std::size_t steps = 1,
                                      ReductionStrategy reduction = ReductionStrategy::tree());
};

/// Logits of the golden block, in double precision.
std::vector<VectorXd> golden_logits(const FidelityInstance& inst);

/// Logits of the cluster simulation with the instance spec and the given
/// atomic seed.
std::vector<VectorXd> simulated_logits(const FidelityInstance& inst, std::uint64_t atomic_seed);

struct MetricSummary {
  double min = 0;
  double mean = 0;
  double max = 0;
};

struct SeedSweep {
  std::vector<std::uint64_t> seeds;
  std::vector<FidelityReport> reports;
  MetricSummary token_match_rate;
  MetricSummary logits_mae;
  std::map<std::size_t, MetricSummary> topk_agreement;
  std::size_t distinct_outputs = 0;  // bitwise-distinct logit sequences
  std::size_t distinct_tokens = 0;   // distinct greedy token sequences
};

SeedSweep seed_sweep(const FidelityInstance& inst, std::span<const std::uint64_t> seeds,
                     std::span<const std::size_t> ks = std::span<const std::size_t>{});

}  // namespace neoxsim

#endif  // NEOXSIM_FIDELITY_HPP
