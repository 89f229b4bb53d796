// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/cluster.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "neoxsim/attention.hpp"
#include "neoxsim/block.hpp"
#include "neoxsim/exact_sum.hpp"
#include "neoxsim/half.hpp"
#include "neoxsim/layers.hpp"
#include "neoxsim/prng.hpp"
#include "neoxsim/rope.hpp"

namespace neoxsim {

void ClusterSpec::validate() const {
  if (n_blocks < 1) throw std::invalid_argument("cluster spec: n_blocks must be >= 1");
  if (element_bytes < 1) throw std::invalid_argument("cluster spec: element_bytes must be >= 1");
}

ReductionStrategy ClusterSpec::effective_reduction(std::vector<std::string>* warnings) const {
  const bool pow2 = (n_blocks & (n_blocks - 1)) == 0;
  if (reduction.kind == ReductionStrategy::Kind::Tree && !pow2) {
    if (warnings) {
      warnings->push_back("tree reduction needs a power-of-two block count; " +
                          std::to_string(n_blocks) + " blocks fall back to ring");
    }
    return ReductionStrategy::ring();
  }
  return reduction;
}

void ExecTrace::add_kernel(const KernelRecord& k) {
  kernels.push_back(k);
  ++kernel_count;
  bytes_offchip += k.bytes_offchip;
  bytes_onchip += k.bytes_onchip;
  sync_steps += k.sync_steps;
  dsmem_exchanges += k.dsmem_exchanges;
}

std::string trace_jsonl(const ExecTrace& trace) {
  std::string out;
  for (const auto& k : trace.kernels) {
    const nlohmann::ordered_json rec = {{"name", k.name},
                                        {"bytes_offchip", k.bytes_offchip},
                                        {"bytes_onchip", k.bytes_onchip},
                                        {"sync_steps", k.sync_steps}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<KvRange> partition_kv(std::size_t seq_len, std::size_t n_blocks) {
  if (n_blocks < 1) throw std::invalid_argument("partition_kv: n_blocks must be >= 1");
  std::vector<KvRange> ranges;
  ranges.reserve(n_blocks);
  const std::size_t base = seq_len / n_blocks;
  const std::size_t extra = seq_len % n_blocks;
  std::size_t begin = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    ranges.push_back({begin, begin + len});
    begin += len;
  }
  return ranges;
}

namespace {

SoftmaxState<double> round_state(SoftmaxState<double> s) {
  s.l = round_to_half(s.l);
  s.o = s.o.unaryExpr(&round_to_half);
  return s;
}

}  // namespace

SplitAttention attend_split(const VectorXd& q, const HeadCache<double>& head, double scale,
                            const ClusterSpec& spec) {
  spec.validate();
  if (head.length() == 0) throw std::invalid_argument("attend: empty cache");
  SplitAttention result;
  const auto strategy = spec.effective_reduction(&result.trace.warnings);
  const bool fp16 = spec.accumulation_precision == Precision::Fp16;
  const MatrixCRef<double> keys(head.keys);
  const MatrixCRef<double> values(head.values);

  std::vector<SoftmaxState<double>> states;
  for (const auto& r : partition_kv(static_cast<std::size_t>(head.length()), spec.n_blocks)) {
    states.push_back(softmax_state(q, keys, values, static_cast<Eigen::Index>(r.begin),
                                   static_cast<Eigen::Index>(r.end), scale));
  }
  const auto schedule = reduction_schedule(states.size(), strategy);
  result.trace.sync_steps = schedule.steps();
  for (const auto& level : schedule.levels) result.trace.dsmem_exchanges += level.size();
  result.trace.bytes_onchip = static_cast<double>(result.trace.dsmem_exchanges) *
                              static_cast<double>((values.cols() + 2) * static_cast<Eigen::Index>(spec.element_bytes));

  if (!fp16) {
    // Exact: every block state is rescaled once against the global max and
    // the terms are summed error-free, so the result does not depend on the
    // merge order. A single state reduces to its own finalize().
    if (states.size() == 1) {
      result.output = states.front().finalize();
      return result;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : states) {
      if (!s.is_empty()) m = std::max(m, s.m);
    }
    ExactSum l;
    std::vector<ExactSum> o(static_cast<std::size_t>(values.cols()));
    for (const auto& s : states) {
      if (s.is_empty()) continue;
      const double c = std::exp(s.m - m);
      l.add(s.l * c);
      for (Eigen::Index j = 0; j < values.cols(); ++j) o[static_cast<std::size_t>(j)].add(s.o[j] * c);
    }
    result.output.resize(values.cols());
    const double denom = l.value();
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      result.output[j] = o[static_cast<std::size_t>(j)].value() / denom;
    }
    return result;
  }

  if (states.size() > 1) {
    for (auto& s : states) s = round_state(std::move(s));
  }
  for (const auto& level : schedule.levels) {
    for (const auto& c : level) {
      states[c.dst] = round_state(merge(states[c.dst], states[c.src]));
    }
  }
  result.output = states[schedule.root].finalize();
  return result;
}

MatrixXd context_partials(const VectorXd& context, const ModelConfig& cfg, std::size_t n_blocks) {
  if (context.size() != static_cast<Eigen::Index>(cfg.hidden)) {
    throw std::invalid_argument("context_partials: size mismatch");
  }
  MatrixXd partials = MatrixXd::Zero(static_cast<Eigen::Index>(n_blocks), context.size());
  const auto slices = partition_kv(cfg.d_head, n_blocks);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const auto base = static_cast<Eigen::Index>(h * cfg.d_head);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const auto begin = base + static_cast<Eigen::Index>(slices[b].begin);
      const auto len = static_cast<Eigen::Index>(slices[b].size());
      partials.row(static_cast<Eigen::Index>(b)).segment(begin, len) =
          context.segment(begin, len).transpose();
    }
  }
  return partials;
}

VectorXd output_project_atomic(const MatrixXd& partials, const MatrixXd& w_out,
                               const VectorXd& b_out, const VectorXd& residual,
                               const ClusterSpec& spec, std::uint64_t step_key) {
  if (partials.cols() != w_out.cols() || w_out.rows() != b_out.size() ||
      residual.size() != b_out.size()) {
    throw std::invalid_argument("output projection: dimension mismatch");
  }
  const MatrixXd contributions = partials * w_out.transpose();  // [blocks x hidden]
  VectorXd out(residual.size());
  std::vector<double> column(static_cast<std::size_t>(contributions.rows()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    for (Eigen::Index b = 0; b < contributions.rows(); ++b) {
      column[static_cast<std::size_t>(b)] = contributions(b, i);
    }
    const auto seed = derive_seed(spec.atomic_seed, {step_key, static_cast<std::uint64_t>(i)});
    if (spec.accumulation_precision == Precision::Exact) {
      ExactSum acc(residual[i]);
      acc.add(b_out[i]);
      for (double c : column) acc.add(c);
      out[i] = acc.value();
    } else {
      out[i] = atomic_accumulate(residual[i] + b_out[i], column, seed, Precision::Fp16);
    }
  }
  return out;
}

namespace {

// Runs kernels in order and accounts for every activation that crosses a
// kernel boundary.
class KernelExecutor {
 public:
  KernelExecutor(std::size_t element_bytes, std::size_t n_kernels)
      : elem_(static_cast<double>(element_bytes)), records_(n_kernels) {}

  void begin_kernel(std::size_t k, std::string name) {
    current_ = k;
    records_[k].name = std::move(name);
    local_.clear();
  }

  void seed_global(const std::string& name, VectorXd v) { global_[name] = std::move(v); }

  const VectorXd& get(const std::string& name) {
    if (auto it = local_.find(name); it != local_.end()) {
      if (produced_in_.count(name) && produced_in_[name] == current_) {
        records_[current_].bytes_onchip += bytes(it->second);
      }
      return it->second;
    }
    const auto it = global_.find(name);
    if (it == global_.end()) throw std::logic_error("executor: tensor '" + name + "' unavailable");
    records_[current_].bytes_offchip += bytes(it->second);
    loaded_by_.insert({name, current_});
    return local_[name] = it->second;
  }

  void put(const std::string& name, VectorXd v) {
    produced_in_[name] = current_;
    local_[name] = v;
    global_[name] = std::move(v);
  }

  void charge_offchip(double elements) { records_[current_].bytes_offchip += elements * elem_; }
  void charge_onchip(double b) { records_[current_].bytes_onchip += b; }
  KernelRecord& record() { return records_[current_]; }

  // Stores happen only for tensors some later kernel loads, plus the output.
  ExecTrace finish(const std::string& output) {
    for (const auto& [name, producer] : produced_in_) {
      const bool needed_later = std::any_of(loaded_by_.begin(), loaded_by_.end(), [&](const auto& l) {
        return l.first == name && l.second != producer;
      });
      if (needed_later || name == output) records_[producer].bytes_offchip += bytes(global_.at(name));
    }
    ExecTrace trace;
    for (const auto& r : records_) trace.add_kernel(r);
    return trace;
  }

  const VectorXd& result(const std::string& name) const { return global_.at(name); }

 private:
  double bytes(const VectorXd& v) const { return static_cast<double>(v.size()) * elem_; }

  double elem_;
  std::vector<KernelRecord> records_;
  std::size_t current_ = 0;
  std::map<std::string, VectorXd> global_;
  std::map<std::string, VectorXd> local_;
  std::map<std::string, std::size_t> produced_in_;
  std::set<std::pair<std::string, std::size_t>> loaded_by_;
};

double weight_elements(const BlockWeights<double>& w, BlockOp op) {
  auto n = [](const auto& t) { return static_cast<double>(t.size()); };
  switch (op) {
    case BlockOp::PreLN: return n(w.ln1_gain) + n(w.ln1_bias);
    case BlockOp::QkvRope: return n(w.qkv_weight) + n(w.qkv_bias);
    case BlockOp::Attend: return 0;
    case BlockOp::OutProj: return n(w.out_weight) + n(w.out_bias);
    case BlockOp::PostLN: return n(w.ln2_gain) + n(w.ln2_bias);
    case BlockOp::MlpUpGelu: return n(w.up_weight) + n(w.up_bias);
    case BlockOp::MlpDown: return n(w.down_weight) + n(w.down_bias);
  }
  return 0;
}

}  // namespace

BlockStep fused_block_step(const VectorXd& x, const BlockWeights<double>& w, KVCache<double>& cache,
                           std::size_t pos, const ModelConfig& cfg, const ClusterSpec& spec,
                           const FusionPlan& plan) {
  plan.validate();
  spec.validate();
  if (cache.length() != pos) {
    throw std::invalid_argument("fused step: cache holds " + std::to_string(cache.length()) +
                                " positions, expected " + std::to_string(pos));
  }
  const double eps = cfg.ln_eps;
  const auto d = static_cast<Eigen::Index>(cfg.d_head);
  const auto hidden = static_cast<double>(cfg.hidden);
  std::vector<std::string> warnings;

  KernelExecutor ex(spec.element_bytes, plan.kernels.size());
  ex.seed_global("x", x);

  for (std::size_t k = 0; k < plan.kernels.size(); ++k) {
    const auto& kernel = plan.kernels[k];
    ex.begin_kernel(k, kernel.name());
    for (BlockOp op : kernel.ops) {
      ex.charge_offchip(weight_elements(w, op));
      switch (op) {
        case BlockOp::PreLN:
          ex.put("a", layernorm_single_pass(ex.get("x"), w.ln1_gain, w.ln1_bias, eps));
          break;
        case BlockOp::QkvRope: {
          const auto qkv = qkv_project(ex.get("a"), w, cfg);
          const MatrixXd k_rot = rope_heads(qkv.k, pos, cfg);
          cache.append(k_rot, qkv.v);
          ex.charge_offchip(2 * hidden);
          const MatrixXd q_rot = rope_heads(qkv.q, pos, cfg);
          ex.put("q", Eigen::Map<const VectorXd>(q_rot.data(), q_rot.size()));
          break;
        }
        case BlockOp::Attend: {
          const VectorXd q = ex.get("q");
          VectorXd context(q.size());
          std::size_t levels = 0;
          for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            const auto r = static_cast<Eigen::Index>(h);
            auto split = attend_split(q.segment(r * d, d), cache.head(h), cfg.attention_scale(), spec);
            context.segment(r * d, d) = split.output;
            levels = std::max(levels, split.trace.sync_steps);
            ex.record().dsmem_exchanges += split.trace.dsmem_exchanges;
            ex.charge_onchip(split.trace.bytes_onchip);
            if (h == 0) warnings = split.trace.warnings;
          }
          // Heads run in parallel clusters; the kernel waits on the slowest.
          ex.record().sync_steps += levels;
          ex.charge_offchip(2.0 * static_cast<double>(cache.length()) * hidden);
          ex.put("ctx", std::move(context));
          break;
        }
        case BlockOp::OutProj: {
          const VectorXd ctx = ex.get("ctx");
          const VectorXd& residual = ex.get("x");
          ex.put("h", output_project_atomic(context_partials(ctx, cfg, spec.n_blocks), w.out_weight,
                                            w.out_bias, residual, spec, pos));
          break;
        }
        case BlockOp::PostLN:
          ex.put("m", layernorm_single_pass(ex.get(cfg.parallel_residual ? "x" : "h"), w.ln2_gain,
                                            w.ln2_bias, eps));
          break;
        case BlockOp::MlpUpGelu: {
          const VectorXd up = w.up_weight * ex.get("m") + w.up_bias;
          ex.put("u", up.unaryExpr([&](double v) { return gelu(v, cfg.gelu); }));
          break;
        }
        case BlockOp::MlpDown: {
          const VectorXd down = w.down_weight * ex.get("u") + w.down_bias;
          ex.put("y", ex.get("h") + down);
          break;
        }
      }
    }
  }

  BlockStep step;
  step.trace = ex.finish("y");
  step.trace.warnings = std::move(warnings);
  step.output = ex.result("y");
  return step;
}

}  // namespace neoxsim
