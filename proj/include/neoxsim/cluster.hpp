// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_CLUSTER_HPP
#define NEOXSIM_CLUSTER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "neoxsim/config.hpp"
#include "neoxsim/kv_cache.hpp"
#include "neoxsim/plan.hpp"
#include "neoxsim/reduction.hpp"
#include "neoxsim/tensor.hpp"
#include "neoxsim/weights.hpp"

namespace neoxsim {

/// One thread-block cluster per attention head; its blocks split the KV
/// sequence and exchange partial softmax states through on-chip memory.
struct ClusterSpec {
  std::size_t n_blocks = 4;
  ReductionStrategy reduction = ReductionStrategy::tree();
  Precision accumulation_precision = Precision::Exact;
  std::uint64_t atomic_seed = 0;
  std::size_t element_bytes = 2;  // for byte accounting only

  void validate() const;

  /// Tree needs a power-of-two block count; otherwise falls back to Ring and
  /// appends a warning.
  ReductionStrategy effective_reduction(std::vector<std::string>* warnings) const;
};

struct KernelRecord {
  std::string name;
  double bytes_offchip = 0;
  double bytes_onchip = 0;
  std::size_t sync_steps = 0;
  std::size_t dsmem_exchanges = 0;

  friend bool operator==(const KernelRecord&, const KernelRecord&) = default;
};

struct ExecTrace {
  std::size_t sync_steps = 0;
  std::size_t dsmem_exchanges = 0;
  double bytes_offchip = 0;
  double bytes_onchip = 0;
  std::size_t kernel_count = 0;
  std::vector<KernelRecord> kernels;
  std::vector<std::string> warnings;

  void add_kernel(const KernelRecord& k);

  friend bool operator==(const ExecTrace&, const ExecTrace&) = default;
};

/// One JSON object per simulated kernel:
/// {"name":..,"bytes_offchip":..,"bytes_onchip":..,"sync_steps":..}
std::string trace_jsonl(const ExecTrace& trace);

struct KvRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const KvRange&, const KvRange&) = default;
};

/// Balanced contiguous split of [0, seq_len): the first seq_len % n_blocks
/// ranges get one extra element; trailing ranges may be empty.
std::vector<KvRange> partition_kv(std::size_t seq_len, std::size_t n_blocks);

struct SplitAttention {
  VectorXd output;
  ExecTrace trace;
};

/// Split-KV decode attention for one head. Each block builds a SoftmaxState
/// over its range; states are merged along the cluster reduction schedule.
/// In Fp16 the exchanged states (l, o) are rounded to binary16 when sent and
/// after every merge. In Exact each state is rescaled once to the global max
/// and summed error-free, so every schedule gives the same bits.
SplitAttention attend_split(const VectorXd& q, const HeadCache<double>& head, double scale,
                            const ClusterSpec& spec);

/// Splits a context vector across the cluster: within each head, block b owns
/// the b-th balanced slice of the head dimensions. Rows sum exactly to `context`.
MatrixXd context_partials(const VectorXd& context, const ModelConfig& cfg, std::size_t n_blocks);

/// Output projection with atomic accumulation. Each block projects its row of
/// `partials` through w_out; the output buffer starts at residual + b_out and
/// receives the per-block contributions in an order keyed by
/// derive_seed(atomic_seed, {step_key, element}).
VectorXd output_project_atomic(const MatrixXd& partials, const MatrixXd& w_out,
                               const VectorXd& b_out, const VectorXd& residual,
                               const ClusterSpec& spec, std::uint64_t step_key = 0);

struct BlockStep {
  VectorXd output;
  ExecTrace trace;
};

/// Runs one decode step through the kernels of `plan`, with cluster semantics
/// for attention and the output projection. Off-chip bytes per kernel are
/// the activations it loads or stores across kernel boundaries, its weights,
/// and KV-cache reads and writes; tensors consumed inside the producing
/// kernel count as on-chip bytes.
BlockStep fused_block_step(const VectorXd& x, const BlockWeights<double>& w, KVCache<double>& cache,
                           std::size_t pos, const ModelConfig& cfg, const ClusterSpec& spec,
                           const FusionPlan& plan);

}  // namespace neoxsim

#endif  // NEOXSIM_CLUSTER_HPP
