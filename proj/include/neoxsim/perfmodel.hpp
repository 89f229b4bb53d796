// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_PERFMODEL_HPP
#define NEOXSIM_PERFMODEL_HPP

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "neoxsim/config.hpp"
#include "neoxsim/plan.hpp"

namespace neoxsim {

struct HardwareModel {
  double bandwidth = 1.8e12;            // bytes / s
  double launch_overhead = 0.0;         // s per kernel launch
  double descriptor_cost = 0.0;         // s per custom kernel per layer, non-graph steps
  double graph_replay_overhead = 0.0;   // s per step in graph mode
  std::array<double, kKernelClassCount> efficiency{1.0, 1.0, 1.0, 1.0};
  std::size_t element_bytes = 2;

  double efficiency_of(KernelClass c) const { return efficiency[static_cast<std::size_t>(c)]; }
  double& efficiency_of(KernelClass c) { return efficiency[static_cast<std::size_t>(c)]; }

  void validate() const;

  friend bool operator==(const HardwareModel&, const HardwareModel&) = default;
};

struct KernelTraffic {
  std::string name;
  KernelClass kernel_class = KernelClass::LibraryGemm;
  double weight_bytes = 0;
  double activation_bytes = 0;
  double kv_bytes = 0;

  double total() const { return weight_bytes + activation_bytes + kv_bytes; }
};

/// Per-step traffic summed over all layers.
struct TrafficReport {
  std::vector<KernelTraffic> kernels;
  /// Off-chip bytes per activation tensor (stores plus loads) at kernel
  /// boundaries. Tensors: x, a, q, ctx, h, m, u, y.
  std::map<std::string, double> boundary_bytes;

  double total() const;
  double activation_total() const;
};

/// Analytic traffic for one decode step with `seq_len` cached positions read
/// by attention. Per layer and kernel: weights of its operators, KV-cache
/// writes (QKV) and reads (2 * seq_len * hidden, attention), and activation
/// tensors stored by their producer when another kernel (or the block
/// output) needs them and loaded once by each other consuming kernel.
TrafficReport traffic(const FusionPlan& plan, const ModelConfig& cfg, std::size_t seq_len,
                      std::size_t element_bytes = 2);

struct KernelCost {
  std::string name;
  KernelClass kernel_class = KernelClass::LibraryGemm;
  double bytes = 0;
  double seconds = 0;
};

struct CostReport {
  std::string plan;
  std::size_t seq_len = 0;
  std::vector<KernelCost> kernels;
  double compute_seconds = 0;
  double overhead_seconds = 0;
  double tpot = 0;        // seconds
  double throughput = 0;  // tokens / s at batch 1
  double bytes = 0;
};

/// kernel time = bytes / (bandwidth * efficiency[class]);
/// overhead = kernels * layers * launch
///          + (graph ? replay : layers * custom_kernels * descriptor_cost)
CostReport step_time(const FusionPlan& plan, const ModelConfig& cfg, const HardwareModel& hw,
                     std::size_t seq_len);

/// Coefficients of the TPOT model, which is linear in
/// (1/eff[4 classes], launch, descriptor, replay) for a fixed bandwidth.
inline constexpr std::size_t kTpotTermCount = kKernelClassCount + 3;
std::array<double, kTpotTermCount> tpot_terms(const FusionPlan& plan, const ModelConfig& cfg,
                                              double bandwidth, std::size_t element_bytes,
                                              std::size_t seq_len);

struct AblationRow {
  std::string configuration;
  FusionPlan plan;
  double tpot = 0;
  double speedup = 0;  // baseline / this
};

struct AblationReport {
  std::size_t seq_len = 0;
  std::vector<AblationRow> rows;  // baseline, attention-only, mlp-down-only, fused
  bool ordering_matches = false;  // fused < attention-only < baseline < mlp-down-only
  double mlp_intermediate_bytes = 0;    // MLP intermediate boundary traffic removed by fusion
  double mlp_intermediate_seconds = 0;  // same at raw bandwidth
};

/// Four configurations: library baseline, custom attention through MLP-up
/// with library MLP-down, library block with custom standalone MLP-down, and
/// the full fused kernel in graph mode.
AblationReport ablate(const ModelConfig& cfg, const HardwareModel& hw, std::size_t seq_len = 2048);

}  // namespace neoxsim

#endif  // NEOXSIM_PERFMODEL_HPP
