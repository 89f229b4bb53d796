// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/perfmodel.hpp"

#include <optional>
#include <set>
#include <stdexcept>

namespace neoxsim {

void HardwareModel::validate() const {
  if (!(bandwidth > 0)) throw std::invalid_argument("hardware: bandwidth must be > 0");
  if (launch_overhead < 0 || descriptor_cost < 0 || graph_replay_overhead < 0) {
    throw std::invalid_argument("hardware: overheads must be >= 0");
  }
  for (double e : efficiency) {
    if (!(e > 0 && e <= 1)) throw std::invalid_argument("hardware: efficiency must be in (0, 1]");
  }
  if (element_bytes < 1) throw std::invalid_argument("hardware: element_bytes must be >= 1");
}

double TrafficReport::total() const {
  double t = 0;
  for (const auto& k : kernels) t += k.total();
  return t;
}

double TrafficReport::activation_total() const {
  double t = 0;
  for (const auto& k : kernels) t += k.activation_bytes;
  return t;
}

namespace {

struct TensorUse {
  const char* name;
  double elements;
  std::optional<BlockOp> producer;  // nullopt: block input
  std::vector<BlockOp> consumers;
  bool block_output;
};

std::vector<TensorUse> tensor_table(const ModelConfig& cfg) {
  const auto h = static_cast<double>(cfg.hidden);
  const auto m = static_cast<double>(cfg.d_mlp);
  std::vector<BlockOp> x_readers = {BlockOp::PreLN, BlockOp::OutProj};
  std::vector<BlockOp> h_readers = {BlockOp::MlpDown};
  (cfg.parallel_residual ? x_readers : h_readers).push_back(BlockOp::PostLN);
  return {
      {"x", h, std::nullopt, x_readers, false},
      {"a", h, BlockOp::PreLN, {BlockOp::QkvRope}, false},
      {"q", h, BlockOp::QkvRope, {BlockOp::Attend}, false},
      {"ctx", h, BlockOp::Attend, {BlockOp::OutProj}, false},
      {"h", h, BlockOp::OutProj, h_readers, false},
      {"m", h, BlockOp::PostLN, {BlockOp::MlpUpGelu}, false},
      {"u", m, BlockOp::MlpUpGelu, {BlockOp::MlpDown}, false},
      {"y", h, BlockOp::MlpDown, {}, true},
  };
}

double op_weight_elements(BlockOp op, const ModelConfig& cfg) {
  const auto h = static_cast<double>(cfg.hidden);
  const auto m = static_cast<double>(cfg.d_mlp);
  switch (op) {
    case BlockOp::PreLN:
    case BlockOp::PostLN: return 2 * h;
    case BlockOp::QkvRope: return 3 * h * h + 3 * h;
    case BlockOp::Attend: return 0;
    case BlockOp::OutProj: return h * h + h;
    case BlockOp::MlpUpGelu: return m * h + m;
    case BlockOp::MlpDown: return h * m + h;
  }
  return 0;
}

}  // namespace

TrafficReport traffic(const FusionPlan& plan, const ModelConfig& cfg, std::size_t seq_len,
                      std::size_t element_bytes) {
  plan.validate();
  const double elem = static_cast<double>(element_bytes);
  const double layers = static_cast<double>(cfg.n_layers);
  const auto h = static_cast<double>(cfg.hidden);

  TrafficReport report;
  for (const auto& k : plan.kernels) {
    KernelTraffic kt;
    kt.name = k.name();
    kt.kernel_class = k.kernel_class();
    for (BlockOp op : k.ops) kt.weight_bytes += op_weight_elements(op, cfg) * elem * layers;
    if (k.contains(BlockOp::QkvRope)) kt.kv_bytes += 2 * h * elem * layers;
    if (k.contains(BlockOp::Attend)) {
      kt.kv_bytes += 2 * static_cast<double>(seq_len) * h * elem * layers;
    }
    report.kernels.push_back(kt);
  }

  for (const auto& t : tensor_table(cfg)) {
    const double bytes = t.elements * elem * layers;
    std::set<std::size_t> readers;
    for (BlockOp c : t.consumers) readers.insert(plan.kernel_of(c));
    double crossing = 0;
    if (!t.producer) {
      for (std::size_t r : readers) report.kernels[r].activation_bytes += bytes;
      crossing = bytes * static_cast<double>(readers.size());
    } else {
      const std::size_t p = plan.kernel_of(*t.producer);
      readers.erase(p);
      if (t.block_output || !readers.empty()) {
        report.kernels[p].activation_bytes += bytes;
        crossing += bytes;
      }
      for (std::size_t r : readers) {
        report.kernels[r].activation_bytes += bytes;
        crossing += bytes;
      }
    }
    report.boundary_bytes[t.name] = crossing;
  }
  return report;
}

CostReport step_time(const FusionPlan& plan, const ModelConfig& cfg, const HardwareModel& hw,
                     std::size_t seq_len) {
  hw.validate();
  const auto tr = traffic(plan, cfg, seq_len, hw.element_bytes);
  CostReport report;
  report.plan = plan.name;
  report.seq_len = seq_len;
  for (const auto& k : tr.kernels) {
    const double seconds = k.total() / (hw.bandwidth * hw.efficiency_of(k.kernel_class));
    report.kernels.push_back({k.name, k.kernel_class, k.total(), seconds});
    report.compute_seconds += seconds;
    report.bytes += k.total();
  }
  const double layers = static_cast<double>(cfg.n_layers);
  report.overhead_seconds =
      static_cast<double>(plan.kernels.size()) * layers * hw.launch_overhead +
      (plan.graph_mode ? hw.graph_replay_overhead
                       : layers * static_cast<double>(plan.custom_kernel_count()) *
                             hw.descriptor_cost);
  report.tpot = report.compute_seconds + report.overhead_seconds;
  report.throughput = 1.0 / report.tpot;
  return report;
}

std::array<double, kTpotTermCount> tpot_terms(const FusionPlan& plan, const ModelConfig& cfg,
                                              double bandwidth, std::size_t element_bytes,
                                              std::size_t seq_len) {
  std::array<double, kTpotTermCount> terms{};
  const auto tr = traffic(plan, cfg, seq_len, element_bytes);
  for (const auto& k : tr.kernels) {
    terms[static_cast<std::size_t>(k.kernel_class)] += k.total() / bandwidth;
  }
  const double layers = static_cast<double>(cfg.n_layers);
  terms[kKernelClassCount] = static_cast<double>(plan.kernels.size()) * layers;
  if (plan.graph_mode) {
    terms[kKernelClassCount + 2] = 1.0;
  } else {
    terms[kKernelClassCount + 1] = layers * static_cast<double>(plan.custom_kernel_count());
  }
  return terms;
}

AblationReport ablate(const ModelConfig& cfg, const HardwareModel& hw, std::size_t seq_len) {
  AblationReport report;
  report.seq_len = seq_len;
  const std::vector<std::pair<std::string, FusionPlan>> configs = {
      {"Library baseline", FusionPlan::baseline()},
      {"Fused attention + library MLP down", FusionPlan::attention_only()},
      {"Library attention + custom MLP down", FusionPlan::mlp_down_only()},
      {"Full fused kernel", FusionPlan::fused(true)},
  };
  double baseline = 0;
  for (const auto& [label, plan] : configs) {
    const double tpot = step_time(plan, cfg, hw, seq_len).tpot;
    if (report.rows.empty()) baseline = tpot;
    report.rows.push_back({label, plan, tpot, baseline / tpot});
  }
  const double base = report.rows[0].tpot;
  const double attn = report.rows[1].tpot;
  const double mlp = report.rows[2].tpot;
  const double fused = report.rows[3].tpot;
  report.ordering_matches = fused < attn && attn < base && base < mlp;

  const auto split = traffic(FusionPlan::attention_only(), cfg, seq_len, hw.element_bytes);
  const auto joined = traffic(FusionPlan::fused(true), cfg, seq_len, hw.element_bytes);
  report.mlp_intermediate_bytes = split.boundary_bytes.at("u") - joined.boundary_bytes.at("u");
  report.mlp_intermediate_seconds = report.mlp_intermediate_bytes / hw.bandwidth;
  return report;
}

}  // namespace neoxsim
