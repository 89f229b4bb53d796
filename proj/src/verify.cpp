// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "neoxsim/attention.hpp"
#include "neoxsim/block.hpp"
#include "neoxsim/cluster.hpp"
#include "neoxsim/layers.hpp"
#include "neoxsim/prng.hpp"
#include "neoxsim/reduction.hpp"
#include "neoxsim/rope.hpp"

namespace neoxsim {

namespace {

// Injected error: a multiple of the check tolerance, at least kFault.
constexpr double kFault = 1e-6;
constexpr double kFaultTolerances = 4.0;

VectorXd random_vector(SplitMix64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

MatrixXd random_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

std::size_t pick(SplitMix64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.bounded(hi - lo + 1));
}

struct Checker {
  SuiteResult& r;
  bool inject;

  // Records |candidate - reference| (max norm) against the tolerance.
  void near(const VectorXd& candidate, const VectorXd& reference, double tol, const std::string& what) {
    VectorXd c = candidate;
    if (inject && r.checks == 0 && c.size() > 0) c[0] += std::max(kFault, kFaultTolerances * tol);
    const double err = c.size() == reference.size()
                           ? (c - reference).cwiseAbs().maxCoeff()
                           : std::numeric_limits<double>::infinity();
    record(err, tol, what);
  }

  void record(double err, double tol, const std::string& what) {
    ++r.checks;
    const double ratio = tol > 0 ? err / tol : (err == 0 ? 0.0 : std::numeric_limits<double>::infinity());
    r.worst_ratio = std::max(r.worst_ratio, ratio);
    if (!(err <= tol)) {
      if (r.passed) r.detail = fmt::format("{}: error {:.3e} > {:.1e}", what, err, tol);
      r.passed = false;
    }
  }

  void expect(bool ok, const std::string& what) {
    if (inject && r.checks == 0) ok = false;
    record(ok ? 0.0 : std::numeric_limits<double>::infinity(), 0.0, what);
  }
};

void suite_split(Checker& c, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, {11}));
  const std::array<ReductionStrategy, 3> strategies = {
      ReductionStrategy::ring(), ReductionStrategy::tree(), ReductionStrategy::permuted_atomic(seed)};
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const std::size_t d = pick(rng, 1, 128);
    const std::size_t seq = pick(rng, 1, 512);
    ClusterSpec spec;
    spec.n_blocks = pick(rng, 1, 16);
    spec.reduction = strategies[trial % strategies.size()];
    const auto di = static_cast<Eigen::Index>(d);
    const auto si = static_cast<Eigen::Index>(seq);
    const MatrixXd keys = random_matrix(rng, si, di) * 2.0;
    const MatrixXd values = random_matrix(rng, si, di);
    const VectorXd q = random_vector(rng, di);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const HeadCache<double> head{Eigen::Map<const MatrixXd>(keys.data(), si, di),
                                 Eigen::Map<const MatrixXd>(values.data(), si, di)};
    const auto split = attend_split(q, head, scale, spec);
    c.near(split.output, attend_naive(q, head, scale), 1e-10,
           fmt::format("seq={} n_blocks={} {}", seq, spec.n_blocks, to_string(spec.reduction)));
  }
}

void suite_layernorm(Checker& c, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, {12}));
  for (std::size_t trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<Eigen::Index>(pick(rng, 2, 2560));
    const VectorXd x = random_vector(rng, n, -3.0, 3.0);
    const VectorXd g = random_vector(rng, n, 0.5, 1.5);
    const VectorXd b = random_vector(rng, n, -0.1, 0.1);
    const VectorXd ref = layernorm_two_pass(x, g, b, 1e-5);
    c.near(layernorm_single_pass(x, g, b, 1e-5), ref, 1e-6 * ref.cwiseAbs().maxCoeff(),
           fmt::format("random hidden={}", n));
  }
  // Large mean, small spread: cancellation in E[x^2] - E[x]^2.
  for (double mean : {1e2, 1e3}) {
    const auto n = Eigen::Index{2560};
    const VectorXd x = VectorXd::Constant(n, mean) + random_vector(rng, n);
    const VectorXd g = VectorXd::Ones(n);
    const VectorXd b = VectorXd::Zero(n);
    const VectorXd ref = layernorm_two_pass(x, g, b, 1e-5);
    c.near(layernorm_single_pass(x, g, b, 1e-5), ref, 1e-3 * ref.cwiseAbs().maxCoeff(),
           fmt::format("large mean {}", mean));
  }
}

void suite_rope(Checker& c, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, {13}));
  for (std::size_t trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 * pick(rng, 1, 64);
    const std::size_t rd = 2 * pick(rng, 0, d / 2);
    const std::size_t pos = pick(rng, 0, 4096);
    const VectorXd v = random_vector(rng, static_cast<Eigen::Index>(d));
    const VectorXd r = rope_partial(v, pos, rd);
    c.near(rope_partial_inverse(r, pos, rd), v, 1e-12, fmt::format("inverse d={} rd={}", d, rd));
    c.near(VectorXd::Constant(1, r.norm()), VectorXd::Constant(1, v.norm()), 1e-12, "norm");
    const auto tail = static_cast<Eigen::Index>(d - rd);
    c.expect(r.tail(tail) == v.tail(tail), "pass-through dims");
    c.expect(rope_partial(v, 0, rd) == v, "position 0");
  }
}

void suite_prefill(Checker& c, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, {14}));
  for (std::size_t seq : {1, 7, 33, 128}) {
    const auto si = static_cast<Eigen::Index>(seq);
    const Eigen::Index d = 16;
    const MatrixXd q = random_matrix(rng, si, d);
    const MatrixXd k = random_matrix(rng, si, d) * 2.0;
    const MatrixXd v = random_matrix(rng, si, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    MatrixXd ref(si, d);
    for (Eigen::Index i = 0; i < si; ++i) {
      ref.row(i) = attend_naive(q.row(i).transpose(), MatrixCRef<double>(k.topRows(i + 1)),
                                MatrixCRef<double>(v.topRows(i + 1)), scale)
                       .transpose();
    }
    for (std::size_t tile : {std::size_t{1}, std::size_t{3}, std::size_t{16}, seq}) {
      const MatrixXd got = prefill_attention_tiled<double>(q, k, v, tile, true);
      c.near(got.reshaped(), ref.reshaped(), 1e-10, fmt::format("seq={} tile={}", seq, tile));
    }
  }
}

void suite_reduction(Checker& c, std::uint64_t seed) {
  for (std::size_t n = 1; n <= 1024; ++n) {
    const auto tree = reduction_schedule(n, ReductionStrategy::tree()).levels.size();
    const auto ring = reduction_schedule(n, ReductionStrategy::ring()).levels.size();
    c.expect(tree == ceil_log2(n) && ring == n - 1, fmt::format("schedule depth n={}", n));
  }
  SplitMix64 rng(derive_seed(seed, {15}));
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t n = pick(rng, 1, 64);
    std::vector<Eigen::VectorXd> values;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd v = random_vector(rng, 8);
      v *= std::ldexp(1.0, static_cast<int>(pick(rng, 0, 60)) - 30);
      values.push_back(std::move(v));
    }
    const auto ref = reduce(values, ReductionStrategy::ring(), Precision::Exact).sum;
    c.near(reduce(values, ReductionStrategy::tree(), Precision::Exact).sum, ref, 0.0,
           fmt::format("tree vs ring n={}", n));
    for (std::uint64_t s = 0; s < 4; ++s) {
      c.near(reduce(values, ReductionStrategy::permuted_atomic(s), Precision::Exact).sum, ref, 0.0,
             fmt::format("permuted seed={} vs ring n={}", s, n));
    }
  }
}

void suite_block(Checker& c, std::uint64_t seed) {
  for (bool parallel : {true, false}) {
    ModelConfig cfg = preset("tiny");
    cfg.parallel_residual = parallel;
    const auto w = BlockWeights<double>::synthesize(cfg, derive_seed(seed, {16}));
    SplitMix64 rng(derive_seed(seed, {17}));
    KVCache<double> golden_cache(cfg.n_heads, cfg.d_head);
    KVCache<double> sim_cache(cfg.n_heads, cfg.d_head);
    ClusterSpec spec;
    spec.n_blocks = 3;
    for (std::size_t pos = 0; pos < 12; ++pos) {
      const VectorXd x = random_vector(rng, static_cast<Eigen::Index>(cfg.hidden));
      const VectorXd ref = decoder_block_golden(x, w, golden_cache, pos, cfg);
      for (const auto& plan : {FusionPlan::fused(true), FusionPlan::baseline()}) {
        KVCache<double> cache = sim_cache;
        const auto step = fused_block_step(x, w, cache, pos, cfg, spec, plan);
        c.near(step.output, ref, 1e-9,
               fmt::format("{} residual, plan {}, pos {}", parallel ? "parallel" : "sequential",
                           plan.name, pos));
      }
      fused_block_step(x, w, sim_cache, pos, cfg, spec, FusionPlan::fused(true));
    }
  }
}

using SuiteFn = std::function<void(Checker&, std::uint64_t)>;

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> suites = {
      {"split", suite_split},         {"layernorm", suite_layernorm}, {"rope", suite_rope},
      {"prefill", suite_prefill},     {"reduction", suite_reduction}, {"block", suite_block}};
  return suites;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

std::vector<SuiteResult> run_verify(const VerifyOptions& options) {
  if (options.suites.empty()) throw std::invalid_argument("no suites selected");
  const auto names = verify_suite_names();
  for (const auto& s : options.suites) {
    if (std::find(names.begin(), names.end(), s) == names.end()) {
      throw std::invalid_argument("unknown verify suite '" + s + "'");
    }
  }
  if (!options.fault.empty() &&
      std::find(names.begin(), names.end(), options.fault) == names.end()) {
    throw std::invalid_argument("unknown fault target '" + options.fault + "'");
  }
  std::vector<SuiteResult> results;
  for (const auto& [name, fn] : registry()) {
    if (std::find(options.suites.begin(), options.suites.end(), name) == options.suites.end()) {
      continue;
    }
    SuiteResult r;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    Checker checker{r, options.fault == name};
    try {
      fn(checker, options.seed);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace neoxsim
