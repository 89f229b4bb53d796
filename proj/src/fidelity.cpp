// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "neoxsim/block.hpp"
#include "neoxsim/kv_cache.hpp"
#include "neoxsim/prng.hpp"

namespace neoxsim {

namespace {

std::size_t argmax(const VectorXd& v) {
  if (v.size() == 0) throw std::invalid_argument("greedy_tokens: empty logits vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

VectorXd random_vector(SplitMix64& rng, Eigen::Index n, double scale) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.uniform(-1.0, 1.0);
  return v;
}

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  if (xs.empty()) return s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  return s;
}

std::vector<double> flatten(const std::vector<VectorXd>& seq) {
  std::vector<double> out;
  for (const auto& v : seq) out.insert(out.end(), v.data(), v.data() + v.size());
  return out;
}

}  // namespace

std::vector<std::size_t> greedy_tokens(std::span<const VectorXd> logits) {
  std::vector<std::size_t> tokens;
  tokens.reserve(logits.size());
  for (const auto& v : logits) tokens.push_back(argmax(v));
  return tokens;
}

std::vector<std::size_t> top_k(const VectorXd& logits, std::size_t k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(logits.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = logits[static_cast<Eigen::Index>(a)];
                      const double vb = logits[static_cast<Eigen::Index>(b)];
                      return va > vb || (va == vb && a < b);
                    });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

FidelityReport compare(std::span<const VectorXd> golden, std::span<const VectorXd> variant,
                       std::span<const std::size_t> ks) {
  if (golden.size() != variant.size()) {
    throw std::invalid_argument("compare: sequence length mismatch (" +
                                std::to_string(golden.size()) + " vs " +
                                std::to_string(variant.size()) + ")");
  }
  FidelityReport r;
  r.n_trials = golden.size();
  for (std::size_t k : ks) r.topk_agreement[k] = 1.0;
  if (golden.empty()) return r;

  std::size_t matches = 0;
  double abs_sum = 0;
  std::size_t entries = 0;
  std::map<std::size_t, std::size_t> agree;
  for (std::size_t t = 0; t < golden.size(); ++t) {
    if (golden[t].size() != variant[t].size()) {
      throw std::invalid_argument("compare: vocabulary mismatch at position " + std::to_string(t));
    }
    if (argmax(golden[t]) == argmax(variant[t])) ++matches;
    abs_sum += (golden[t] - variant[t]).cwiseAbs().sum();
    entries += static_cast<std::size_t>(golden[t].size());
    for (std::size_t k : ks) {
      if (top_k(golden[t], k) == top_k(variant[t], k)) ++agree[k];
    }
  }
  const auto n = static_cast<double>(golden.size());
  r.token_match_rate = static_cast<double>(matches) / n;
  r.logits_mae = abs_sum / static_cast<double>(entries);
  for (std::size_t k : ks) r.topk_agreement[k] = static_cast<double>(agree[k]) / n;
  return r;
}

FidelityInstance FidelityInstance::random(const ModelConfig& cfg, std::uint64_t seed,
                                          std::size_t steps, std::size_t vocab,
                                          const ClusterSpec& spec) {
  cfg.validate();
  FidelityInstance inst;
  inst.cfg = cfg;
  inst.spec = spec;
  inst.weights = BlockWeights<double>::synthesize(cfg, derive_seed(seed, {1}));
  const auto hidden = static_cast<Eigen::Index>(cfg.hidden);
  SplitMix64 rng(derive_seed(seed, {2}));
  inst.unembed.resize(static_cast<Eigen::Index>(vocab), hidden);
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  for (Eigen::Index i = 0; i < inst.unembed.rows(); ++i) {
    inst.unembed.row(i) = random_vector(rng, hidden, s).transpose();
  }
  inst.unembed_bias = random_vector(rng, static_cast<Eigen::Index>(vocab), 0.1);
  for (std::size_t t = 0; t < steps; ++t) inst.inputs.push_back(random_vector(rng, hidden, 1.0));
  return inst;
}

FidelityInstance FidelityInstance::adversarial(std::size_t steps, ReductionStrategy reduction) {
  FidelityInstance inst;
  inst.cfg = preset("tiny");
  const ModelConfig& cfg = inst.cfg;
  inst.weights = BlockWeights<double>::zeros(cfg);
  const double tiny = std::ldexp(1.0, -11);
  // Interleaved layout: head 0 rows are q[0..d), k[d..2d), v[2d..3d).
  const auto d = static_cast<Eigen::Index>(cfg.d_head);
  inst.weights.qkv_bias.segment(2 * d, d) << 1.0, tiny, tiny, 0.0;
  inst.weights.out_weight.row(0).head(d).setOnes();

  const auto hidden = static_cast<Eigen::Index>(cfg.hidden);
  inst.unembed = MatrixXd::Zero(2, hidden);
  inst.unembed(0, 0) = 1.0;
  inst.unembed_bias = VectorXd::Zero(2);
  inst.unembed_bias[1] = 1.0 + tiny;
  inst.inputs.assign(steps, VectorXd::Zero(hidden));
  inst.spec.n_blocks = 4;
  inst.spec.reduction = reduction;
  inst.spec.accumulation_precision = Precision::Fp16;
  return inst;
}

std::vector<VectorXd> golden_logits(const FidelityInstance& inst) {
  KVCache<double> cache(inst.cfg.n_heads, inst.cfg.d_head);
  std::vector<VectorXd> logits;
  for (std::size_t t = 0; t < inst.inputs.size(); ++t) {
    const VectorXd y = decoder_block_golden(inst.inputs[t], inst.weights, cache, t, inst.cfg);
    logits.emplace_back(inst.unembed * y + inst.unembed_bias);
  }
  return logits;
}

std::vector<VectorXd> simulated_logits(const FidelityInstance& inst, std::uint64_t atomic_seed) {
  ClusterSpec spec = inst.spec;
  spec.atomic_seed = atomic_seed;
  KVCache<double> cache(inst.cfg.n_heads, inst.cfg.d_head);
  std::vector<VectorXd> logits;
  for (std::size_t t = 0; t < inst.inputs.size(); ++t) {
    const auto step = fused_block_step(inst.inputs[t], inst.weights, cache, t, inst.cfg, spec, inst.plan);
    logits.emplace_back(inst.unembed * step.output + inst.unembed_bias);
  }
  return logits;
}

SeedSweep seed_sweep(const FidelityInstance& inst, std::span<const std::uint64_t> seeds,
                     std::span<const std::size_t> ks) {
  const auto golden = golden_logits(inst);
  SeedSweep sweep;
  sweep.seeds.assign(seeds.begin(), seeds.end());
  std::set<std::vector<double>> outputs;
  std::set<std::vector<std::size_t>> token_seqs;
  std::vector<double> match, mae;
  std::map<std::size_t, std::vector<double>> topk;
  for (std::uint64_t seed : seeds) {
    const auto logits = simulated_logits(inst, seed);
    outputs.insert(flatten(logits));
    token_seqs.insert(greedy_tokens(logits));
    auto report = compare(golden, logits, ks);
    match.push_back(report.token_match_rate);
    mae.push_back(report.logits_mae);
    for (const auto& [k, v] : report.topk_agreement) topk[k].push_back(v);
    sweep.reports.push_back(std::move(report));
  }
  sweep.token_match_rate = summarize(match);
  sweep.logits_mae = summarize(mae);
  for (const auto& [k, v] : topk) sweep.topk_agreement[k] = summarize(v);
  sweep.distinct_outputs = outputs.size();
  sweep.distinct_tokens = token_seqs.size();
  return sweep;
}

}  // namespace neoxsim
