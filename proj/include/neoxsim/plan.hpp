// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_PLAN_HPP
#define NEOXSIM_PLAN_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace neoxsim {

/// The seven operators of a decoder block, in pipeline order.
enum class BlockOp { PreLN, QkvRope, Attend, OutProj, PostLN, MlpUpGelu, MlpDown };

inline constexpr std::array<BlockOp, 7> kPipeline = {
    BlockOp::PreLN,  BlockOp::QkvRope,   BlockOp::Attend, BlockOp::OutProj,
    BlockOp::PostLN, BlockOp::MlpUpGelu, BlockOp::MlpDown};

std::string to_string(BlockOp op);
BlockOp parse_block_op(const std::string& s);

/// Library kernels stand for framework/vendor-library launches; Custom
/// kernels are the hand-written cluster kernels (they need descriptors).
enum class Backend { Library, Custom };

/// Efficiency class of a kernel in the cost model.
enum class KernelClass { LibraryGemm, LibraryAttention, FusedCluster, MlpDownStandalone };

inline constexpr std::size_t kKernelClassCount = 4;

std::string to_string(KernelClass c);

struct Kernel {
  std::vector<BlockOp> ops;
  Backend backend = Backend::Library;

  std::string name() const;
  KernelClass kernel_class() const;
  bool contains(BlockOp op) const;

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

/// Assignment of the block operators to kernels. Each operator appears in
/// exactly one kernel and concatenating the kernels gives pipeline order.
struct FusionPlan {
  std::string name = "custom";
  std::vector<Kernel> kernels;
  bool graph_mode = false;

  /// Throws std::invalid_argument("operator unassigned/duplicated") or an
  /// ordering error.
  void validate() const;

  std::size_t kernel_of(BlockOp op) const;
  std::size_t custom_kernel_count() const;

  /// Plan with kernels k and k+1 fused into one (Custom if either is).
  FusionPlan merged(std::size_t k) const;

  /// Seven library kernels, no graph (framework baseline).
  static FusionPlan baseline();
  /// One custom kernel for the whole block.
  static FusionPlan fused(bool graph_mode);
  /// Custom kernel through MLP-up, library MLP-down.
  static FusionPlan attention_only();
  /// Library kernels except a standalone custom MLP-down.
  static FusionPlan mlp_down_only();
  /// Seven custom singleton kernels.
  static FusionPlan singleton_custom();

  friend bool operator==(const FusionPlan&, const FusionPlan&) = default;
};

/// Named plans: baseline, fused, fused_graph, attention_only, mlp_down_only,
/// singleton. Anything else is parsed as an explicit layout, kernels separated
/// by '|' and operators by ',', a leading '!' marking a library kernel, e.g.
/// "pre_ln,qkv_rope,attend|!out_proj|post_ln,mlp_up_gelu,mlp_down".
FusionPlan parse_plan(const std::string& spec, bool graph_mode = false);
std::string describe_plan(const FusionPlan& plan);

}  // namespace neoxsim

#endif  // NEOXSIM_PLAN_HPP
