// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/plan.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace neoxsim {

std::string to_string(BlockOp op) {
  switch (op) {
    case BlockOp::PreLN: return "pre_ln";
    case BlockOp::QkvRope: return "qkv_rope";
    case BlockOp::Attend: return "attend";
    case BlockOp::OutProj: return "out_proj";
    case BlockOp::PostLN: return "post_ln";
    case BlockOp::MlpUpGelu: return "mlp_up_gelu";
    case BlockOp::MlpDown: return "mlp_down";
  }
  return "?";
}

BlockOp parse_block_op(const std::string& s) {
  for (BlockOp op : kPipeline) {
    if (to_string(op) == s) return op;
  }
  throw std::invalid_argument("unknown block operator '" + s + "'");
}

std::string to_string(KernelClass c) {
  switch (c) {
    case KernelClass::LibraryGemm: return "library_gemm";
    case KernelClass::LibraryAttention: return "library_attention";
    case KernelClass::FusedCluster: return "fused_cluster";
    case KernelClass::MlpDownStandalone: return "mlp_down_standalone";
  }
  return "?";
}

std::string Kernel::name() const {
  std::string out;
  for (BlockOp op : ops) {
    if (!out.empty()) out += '+';
    out += to_string(op);
  }
  return out;
}

bool Kernel::contains(BlockOp op) const {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

KernelClass Kernel::kernel_class() const {
  if (backend == Backend::Library) {
    return ops.size() == 1 && ops[0] == BlockOp::Attend ? KernelClass::LibraryAttention
                                                        : KernelClass::LibraryGemm;
  }
  return ops.size() == 1 && ops[0] == BlockOp::MlpDown ? KernelClass::MlpDownStandalone
                                                       : KernelClass::FusedCluster;
}

void FusionPlan::validate() const {
  std::vector<BlockOp> flat;
  for (const auto& k : kernels) {
    if (k.ops.empty()) throw std::invalid_argument("fusion plan '" + name + "': empty kernel");
    flat.insert(flat.end(), k.ops.begin(), k.ops.end());
  }
  for (BlockOp op : kPipeline) {
    if (std::count(flat.begin(), flat.end(), op) != 1) {
      throw std::invalid_argument("operator unassigned/duplicated: " + to_string(op) +
                                  " in plan '" + name + "'");
    }
  }
  if (!std::equal(flat.begin(), flat.end(), kPipeline.begin(), kPipeline.end())) {
    throw std::invalid_argument("fusion plan '" + name +
                                "': kernel operator order must follow the pipeline");
  }
}

std::size_t FusionPlan::kernel_of(BlockOp op) const {
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (kernels[i].contains(op)) return i;
  }
  throw std::invalid_argument("operator unassigned/duplicated: " + to_string(op));
}

std::size_t FusionPlan::custom_kernel_count() const {
  return static_cast<std::size_t>(std::count_if(
      kernels.begin(), kernels.end(), [](const Kernel& k) { return k.backend == Backend::Custom; }));
}

FusionPlan FusionPlan::merged(std::size_t k) const {
  if (k + 1 >= kernels.size()) throw std::out_of_range("fusion plan: no kernel after index");
  FusionPlan out = *this;
  out.name = name + "/merge" + std::to_string(k);
  auto& a = out.kernels[k];
  const auto& b = kernels[k + 1];
  a.ops.insert(a.ops.end(), b.ops.begin(), b.ops.end());
  if (b.backend == Backend::Custom) a.backend = Backend::Custom;
  out.kernels.erase(out.kernels.begin() + static_cast<std::ptrdiff_t>(k) + 1);
  return out;
}

namespace {

FusionPlan singletons(const std::string& name, Backend backend) {
  FusionPlan p;
  p.name = name;
  for (BlockOp op : kPipeline) p.kernels.push_back({{op}, backend});
  return p;
}

}  // namespace

FusionPlan FusionPlan::baseline() { return singletons("baseline", Backend::Library); }

FusionPlan FusionPlan::singleton_custom() { return singletons("singleton", Backend::Custom); }

FusionPlan FusionPlan::fused(bool graph_mode) {
  FusionPlan p;
  p.name = graph_mode ? "fused_graph" : "fused";
  p.kernels.push_back({{kPipeline.begin(), kPipeline.end()}, Backend::Custom});
  p.graph_mode = graph_mode;
  return p;
}

FusionPlan FusionPlan::attention_only() {
  FusionPlan p;
  p.name = "attention_only";
  p.kernels.push_back({{kPipeline.begin(), kPipeline.end() - 1}, Backend::Custom});
  p.kernels.push_back({{BlockOp::MlpDown}, Backend::Library});
  return p;
}

FusionPlan FusionPlan::mlp_down_only() {
  FusionPlan p = singletons("mlp_down_only", Backend::Library);
  p.kernels.back().backend = Backend::Custom;
  return p;
}

FusionPlan parse_plan(const std::string& spec, bool graph_mode) {
  FusionPlan p;
  if (spec == "baseline") {
    p = FusionPlan::baseline();
  } else if (spec == "fused") {
    p = FusionPlan::fused(false);
  } else if (spec == "fused_graph") {
    p = FusionPlan::fused(true);
  } else if (spec == "attention_only") {
    p = FusionPlan::attention_only();
  } else if (spec == "mlp_down_only") {
    p = FusionPlan::mlp_down_only();
  } else if (spec == "singleton") {
    p = FusionPlan::singleton_custom();
  } else {
    p.name = spec;
    std::stringstream kernels(spec);
    std::string kernel_text;
    while (std::getline(kernels, kernel_text, '|')) {
      Kernel k;
      k.backend = Backend::Custom;
      if (!kernel_text.empty() && kernel_text.front() == '!') {
        k.backend = Backend::Library;
        kernel_text.erase(0, 1);
      }
      std::stringstream ops(kernel_text);
      std::string op;
      while (std::getline(ops, op, ',')) k.ops.push_back(parse_block_op(op));
      p.kernels.push_back(std::move(k));
    }
  }
  if (graph_mode) p.graph_mode = true;
  p.validate();
  return p;
}

std::string describe_plan(const FusionPlan& plan) {
  std::string out;
  for (const auto& k : plan.kernels) {
    if (!out.empty()) out += '|';
    if (k.backend == Backend::Library) out += '!';
    for (std::size_t i = 0; i < k.ops.size(); ++i) {
      if (i) out += ',';
      out += to_string(k.ops[i]);
    }
  }
  return out;
}

}  // namespace neoxsim
