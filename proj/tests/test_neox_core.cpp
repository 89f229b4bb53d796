// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "neoxsim/attention.hpp"
#include "neoxsim/block.hpp"
#include "neoxsim/config.hpp"
#include "neoxsim/kv_cache.hpp"
#include "neoxsim/layers.hpp"
#include "neoxsim/prng.hpp"
#include "neoxsim/rope.hpp"
#include "neoxsim/weights.hpp"

namespace neoxsim {
namespace {

using LD = long double;

VectorXd rand_vec(SplitMix64& rng, Eigen::Index n, double lo = -1, double hi = 1) {
  return VectorXd::NullaryExpr(n, [&] { return rng.uniform(lo, hi); });
}

MatrixXd rand_mat(SplitMix64& rng, Eigen::Index r, Eigen::Index c) {
  return MatrixXd::NullaryExpr(r, c, [&] { return rng.uniform(-1, 1); });
}

// LayerNorm in long double with compensated-free straightforward passes.
std::vector<LD> ln_oracle(const VectorXd& x, const VectorXd& g, const VectorXd& b, LD eps) {
  LD mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  LD var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  std::vector<LD> out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out.push_back((x[i] - mean) / std::sqrt(var + eps) * g[i] + b[i]);
  }
  return out;
}

// softmax(qK^T s)V in long double.
std::vector<LD> attention_oracle(const VectorXd& q, const MatrixXd& k, const MatrixXd& v, LD scale) {
  std::vector<LD> logits;
  LD mx = -std::numeric_limits<LD>::infinity();
  for (Eigen::Index t = 0; t < k.rows(); ++t) {
    LD s = 0;
    for (Eigen::Index j = 0; j < q.size(); ++j) s += static_cast<LD>(q[j]) * k(t, j);
    logits.push_back(s * scale);
    mx = std::max(mx, logits.back());
  }
  LD denom = 0;
  std::vector<LD> out(static_cast<std::size_t>(v.cols()), 0);
  for (Eigen::Index t = 0; t < k.rows(); ++t) {
    const LD p = std::exp(logits[static_cast<std::size_t>(t)] - mx);
    denom += p;
    for (Eigen::Index j = 0; j < v.cols(); ++j) out[static_cast<std::size_t>(j)] += p * v(t, j);
  }
  for (auto& o : out) o /= denom;
  return out;
}

template <typename V>
double max_abs_diff(const VectorXd& a, const V& b) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, static_cast<double>(std::fabs(static_cast<LD>(a[i]) - b[static_cast<std::size_t>(i)])));
  }
  return worst;
}

// ---------------------------------------------------------------- config

TEST(Config, Presets) {
  const auto p = preset("pythia-2.8b");
  EXPECT_EQ(p.hidden, 2560u);
  EXPECT_EQ(p.n_heads, 32u);
  EXPECT_EQ(p.d_head, 80u);
  EXPECT_EQ(p.n_layers, 32u);
  EXPECT_EQ(p.d_mlp, 10240u);
  EXPECT_EQ(p.rotary_dims(), 20u);
  EXPECT_TRUE(p.parallel_residual);
  EXPECT_EQ(p.ln_eps, 1e-5);
  EXPECT_EQ(p.rope_base, 10000.0);
  const auto big = preset("pythia-6.9b");
  EXPECT_EQ(big.hidden, 4096u);
  EXPECT_EQ(big.d_head, 128u);
  EXPECT_EQ(big.d_mlp, 16384u);
  const auto t = preset("tiny");
  EXPECT_EQ(t.hidden, 8u);
  EXPECT_EQ(t.d_mlp, 16u);
  EXPECT_THROW(preset("gpt-5"), std::invalid_argument);
}

TEST(Config, ValidateRejectsBadShapes) {
  auto c = preset("tiny");
  c.hidden = 9;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = preset("tiny");
  c.rotary_pct = 0.25;  // floor(0.25 * 4) = 1, odd
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = preset("tiny");
  c.n_layers = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------- layernorm

TEST(LayerNorm, SpecExamples) {
  const VectorXd ones = VectorXd::Ones(4);
  EXPECT_EQ(layernorm_two_pass(ones, ones, VectorXd::Zero(4), 1e-5), VectorXd::Zero(4));
  const VectorXd bias = VectorXd::LinSpaced(4, -1, 1);
  const VectorXd gain = VectorXd::Constant(4, 3.0);
  EXPECT_EQ(layernorm_single_pass(ones, gain, bias, 1e-5), bias);
  const Eigen::Vector2d x(1, -1);
  EXPECT_EQ(layernorm_two_pass(x, Eigen::Vector2d::Ones(), Eigen::Vector2d::Zero(), 0.0), x);
}

TEST(LayerNorm, TwoPassMatchesHighPrecision) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXd x = rand_vec(rng, 64, -5, 5);
    const VectorXd g = rand_vec(rng, 64, 0.5, 1.5);
    const VectorXd b = rand_vec(rng, 64);
    const auto ref = ln_oracle(x, g, b, 1e-5L);
    const VectorXd got = layernorm_two_pass(x, g, b, 1e-5);
    LD scale = 0;
    for (LD v : ref) scale = std::max(scale, std::fabs(v));
    ASSERT_LE(max_abs_diff(got, ref), 1e-12 * static_cast<double>(scale));
  }
}

TEST(LayerNorm, SinglePassMatchesTwoPass) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.bounded(2560));
    const double mean = rng.uniform(-100, 100);
    const VectorXd x = (rand_vec(rng, n, -3, 3).array() + mean).matrix();
    const VectorXd g = rand_vec(rng, n, 0.5, 1.5);
    const VectorXd b = rand_vec(rng, n, -0.1, 0.1);
    const VectorXd ref = layernorm_two_pass(x, g, b, 1e-5);
    const VectorXd got = layernorm_single_pass(x, g, b, 1e-5);
    ASSERT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(LayerNorm, LargeMeanRelaxedTolerance) {
  SplitMix64 rng(3);
  const VectorXd x = (rand_vec(rng, 2560).array() + 10000.0).matrix();
  const VectorXd g = VectorXd::Ones(2560);
  const VectorXd b = VectorXd::Zero(2560);
  const VectorXd ref = layernorm_two_pass(x, g, b, 1e-5);
  const VectorXd got = layernorm_single_pass(x, g, b, 1e-5);
  EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-3 * ref.cwiseAbs().maxCoeff());
}

TEST(LayerNorm, VarianceClampedAtZero) {
  // Constant large vector: E[x^2] - E[x]^2 may round negative.
  const VectorXd x = VectorXd::Constant(7, 0.1 + 1e8);
  const VectorXd y = layernorm_single_pass(x, VectorXd::Ones(7), VectorXd::Zero(7), 1e-5);
  EXPECT_TRUE(y.allFinite());
}

TEST(LayerNorm, NonFiniteInputThrows) {
  VectorXd x = VectorXd::Ones(3);
  x[1] = std::numeric_limits<double>::quiet_NaN();
  for (int pass = 0; pass < 2; ++pass) {
    try {
      if (pass == 0) {
        layernorm_two_pass(x, VectorXd::Ones(3), VectorXd::Zero(3), 1e-5);
      } else {
        layernorm_single_pass(x, VectorXd::Ones(3), VectorXd::Zero(3), 1e-5);
      }
      FAIL();
    } catch (const std::domain_error& e) {
      EXPECT_STREQ(e.what(), "non-finite activation");
    }
  }
}

// ---------------------------------------------------------------- gelu / mlp

// Frozen from a dense sweep of [-8, 8] at 1e-4 spacing with an independent
// erf/tanh implementation (the maximum sits near x = -2.6989).
constexpr double kGeluTanhBound = 4.73235519323335e-4;

double gelu_sweep_bound() {
  double worst = 0;
  for (int i = -80000; i <= 80000; ++i) {
    const double x = i * 1e-4;
    worst = std::max(worst, std::fabs(gelu_tanh(x) - gelu_exact(x)));
  }
  return worst;
}

TEST(Gelu, Examples) {
  EXPECT_EQ(gelu_exact(0.0), 0.0);
  EXPECT_EQ(gelu_tanh(0.0), 0.0);
  EXPECT_NEAR(gelu_exact(10.0), 10.0, 1e-6);
  EXPECT_NEAR(gelu_tanh(10.0), 10.0, 1e-6);
  EXPECT_NEAR(gelu_exact(1.0), 0.8413447460685429, 1e-15);
}

TEST(Gelu, SweepBoundFixture) {
  const double b = gelu_sweep_bound();
  EXPECT_NEAR(b, kGeluTanhBound, 1e-12);
  EXPECT_EQ(b, gelu_sweep_bound());
}

TEST(Mlp, ZeroInputZeroBias) {
  const auto cfg = preset("tiny");
  auto w = BlockWeights<double>::synthesize(cfg, 4);
  w.up_bias.setZero();
  w.down_bias.setZero();
  EXPECT_EQ(mlp(VectorXd::Zero(8), w, GeluKind::Exact), VectorXd::Zero(8));
}

TEST(Mlp, MatchesComposedDenseOracle) {
  ModelConfig cfg = preset("tiny");
  cfg.d_mlp = 32;
  const auto w = BlockWeights<double>::synthesize(cfg, 5);
  SplitMix64 rng(6);
  const VectorXd x = rand_vec(rng, 8);
  // Three separate dense ops in long double.
  std::vector<LD> up(32), act(32), out(8);
  for (int i = 0; i < 32; ++i) {
    LD s = w.up_bias[i];
    for (int j = 0; j < 8; ++j) s += static_cast<LD>(w.up_weight(i, j)) * x[j];
    up[static_cast<std::size_t>(i)] = s;
    act[static_cast<std::size_t>(i)] = 0.5L * s * (1.0L + std::erf(s / std::sqrt(2.0L)));
  }
  for (int i = 0; i < 8; ++i) {
    LD s = w.down_bias[i];
    for (int j = 0; j < 32; ++j) s += static_cast<LD>(w.down_weight(i, j)) * act[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  EXPECT_LE(max_abs_diff(mlp(x, w, GeluKind::Exact), out), 1e-12);
}

TEST(Mlp, GeluSwapBound) {
  SplitMix64 rng(7);
  ModelConfig cfg = preset("tiny");
  cfg.d_mlp = 32;
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = BlockWeights<double>::synthesize(cfg, 100 + trial);
    const VectorXd x = rand_vec(rng, 8, -3, 3);
    const double diff = (mlp(x, w, GeluKind::Exact) - mlp(x, w, GeluKind::Tanh)).cwiseAbs().maxCoeff();
    const double bound = w.down_weight.cwiseAbs().maxCoeff() * kGeluTanhBound * 32;
    ASSERT_LE(diff, bound);
  }
}

// ---------------------------------------------------------------- qkv

TEST(Qkv, IdentityLikeWeights) {
  const auto cfg = preset("tiny");
  auto w = BlockWeights<double>::zeros(cfg);
  for (int h = 0; h < 2; ++h) {
    for (int j = 0; j < 4; ++j) w.qkv_weight(h * 12 + j, h * 4 + j) = 1.0;
  }
  SplitMix64 rng(8);
  const VectorXd x = rand_vec(rng, 8);
  const auto qkv = qkv_project(x, w, cfg);
  for (int h = 0; h < 2; ++h) {
    EXPECT_EQ(qkv.q.row(h).transpose(), x.segment(h * 4, 4));
    EXPECT_EQ(qkv.k.row(h), Eigen::RowVectorXd::Zero(4));
  }
}

TEST(Qkv, ZeroInputGivesBiasSlices) {
  const auto cfg = preset("tiny");
  const auto w = BlockWeights<double>::synthesize(cfg, 9);
  const auto qkv = qkv_project(VectorXd::Zero(8), w, cfg);
  for (int h = 0; h < 2; ++h) {
    EXPECT_EQ(qkv.q.row(h).transpose(), w.qkv_bias.segment(h * 12, 4));
    EXPECT_EQ(qkv.k.row(h).transpose(), w.qkv_bias.segment(h * 12 + 4, 4));
    EXPECT_EQ(qkv.v.row(h).transpose(), w.qkv_bias.segment(h * 12 + 8, 4));
  }
}

TEST(Qkv, InterleavedMatchesConcatenatedLayout) {
  const auto cfg = preset("tiny");
  const auto w = BlockWeights<double>::synthesize(cfg, 10);
  // Permute interleaved rows into a concatenated [Q_all; K_all; V_all] matrix.
  MatrixXd cat(24, 8);
  VectorXd cat_bias(24);
  for (int part = 0; part < 3; ++part) {
    for (int h = 0; h < 2; ++h) {
      for (int j = 0; j < 4; ++j) {
        cat.row(part * 8 + h * 4 + j) = w.qkv_weight.row(h * 12 + part * 4 + j);
        cat_bias[part * 8 + h * 4 + j] = w.qkv_bias[h * 12 + part * 4 + j];
      }
    }
  }
  SplitMix64 rng(11);
  const VectorXd x = rand_vec(rng, 8);
  const VectorXd dense = cat * x + cat_bias;
  const auto qkv = qkv_project(x, w, cfg);
  for (int h = 0; h < 2; ++h) {
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(qkv.q(h, j), dense[h * 4 + j], 1e-15);
      EXPECT_NEAR(qkv.k(h, j), dense[8 + h * 4 + j], 1e-15);
      EXPECT_NEAR(qkv.v(h, j), dense[16 + h * 4 + j], 1e-15);
    }
  }
}

TEST(Qkv, LayoutMismatchThrows) {
  const auto cfg = preset("tiny");
  auto w = BlockWeights<double>::synthesize(cfg, 12);
  w.qkv_weight.conservativeResize(23, 8);
  EXPECT_THROW(qkv_project(VectorXd::Zero(8), w, cfg), std::invalid_argument);
}

// ---------------------------------------------------------------- rope

TEST(Rope, PositionZeroIsIdentity) {
  SplitMix64 rng(13);
  const VectorXd v = rand_vec(rng, 80);
  EXPECT_EQ(rope_partial(v, 0, 20), v);
}

TEST(Rope, PassThroughDimsBitwise) {
  SplitMix64 rng(14);
  const auto cfg = preset("pythia-2.8b");
  for (std::size_t pos : {1, 17, 999, 65535}) {
    const VectorXd v = rand_vec(rng, 80);
    const VectorXd r = rope_partial(v, pos, cfg.rotary_dims());
    EXPECT_EQ(r.tail(60), v.tail(60));
    EXPECT_NE(r.head(20), v.head(20));
  }
}

TEST(Rope, HalfSplitPairingOracle) {
  SplitMix64 rng(15);
  const VectorXd v = rand_vec(rng, 8);
  const std::size_t pos = 5;
  const VectorXd r = rope_partial(v, pos, 4, 10000.0);
  for (int i = 0; i < 2; ++i) {
    const double theta = pos * std::pow(10000.0, -2.0 * i / 4.0);
    EXPECT_NEAR(r[i], v[i] * std::cos(theta) - v[i + 2] * std::sin(theta), 1e-15);
    EXPECT_NEAR(r[i + 2], v[i] * std::sin(theta) + v[i + 2] * std::cos(theta), 1e-15);
  }
}

TEST(Rope, NormPreservedAndInvertible) {
  SplitMix64 rng(16);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t pos = rng.bounded(65536);
    const VectorXd v = rand_vec(rng, 80);
    const VectorXd r = rope_partial(v, pos, 20);
    ASSERT_NEAR(r.head(20).squaredNorm(), v.head(20).squaredNorm(), 1e-10 * v.head(20).squaredNorm());
    ASSERT_LE((rope_partial_inverse(r, pos, 20) - v).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Rope, OddRotaryDimsThrows) {
  EXPECT_THROW(rope_partial(VectorXd::Ones(8), 3, 3), std::invalid_argument);
  EXPECT_THROW(rope_partial(VectorXd::Ones(8), 3, 10), std::invalid_argument);
}

// ---------------------------------------------------------------- attention

TEST(Attention, SingletonCacheReturnsValue) {
  SplitMix64 rng(17);
  const MatrixXd k = rand_mat(rng, 1, 16);
  const MatrixXd v = rand_mat(rng, 1, 16);
  const VectorXd q = rand_vec(rng, 16);
  EXPECT_EQ(attend_naive(q, k, v, 0.25), VectorXd(v.row(0).transpose()));
}

TEST(Attention, EqualKeysAverageValues) {
  SplitMix64 rng(18);
  MatrixXd k(2, 4);
  k.row(0) = rand_vec(rng, 4).transpose();
  k.row(1) = k.row(0);
  const MatrixXd v = rand_mat(rng, 2, 4);
  const VectorXd out = attend_naive(rand_vec(rng, 4), k, v, 0.5);
  const VectorXd avg = (v.row(0) + v.row(1)).transpose() / 2;
  EXPECT_LE((out - avg).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Attention, MatchesHighPrecisionOracle) {
  SplitMix64 rng(19);
  const MatrixXd k = rand_mat(rng, 37, 16) * 3;
  const MatrixXd v = rand_mat(rng, 37, 16);
  const VectorXd q = rand_vec(rng, 16);
  const VectorXd got = attend_naive(q, k, v, 0.25);
  EXPECT_LE(max_abs_diff(got, attention_oracle(q, k, v, 0.25L)), 1e-12);
  // Convex combination of cached values.
  for (int j = 0; j < 16; ++j) {
    EXPECT_GE(got[j], v.col(j).minCoeff() - 1e-15);
    EXPECT_LE(got[j], v.col(j).maxCoeff() + 1e-15);
  }
}

TEST(Attention, EmptyCacheThrows) {
  const MatrixXd empty(0, 4);
  EXPECT_THROW(attend_naive(VectorXd::Ones(4), empty, empty, 0.5), std::invalid_argument);
}

TEST(Attention, SoftmaxStateMergeCommutesAndAssociates) {
  SplitMix64 rng(20);
  const MatrixXd k = rand_mat(rng, 30, 8);
  const MatrixXd v = rand_mat(rng, 30, 8);
  const VectorXd q = rand_vec(rng, 8);
  const auto a = softmax_state(q, k, v, 0, 10, 0.3);
  const auto b = softmax_state(q, k, v, 10, 20, 0.3);
  const auto c = softmax_state(q, k, v, 20, 30, 0.3);
  const VectorXd ab_c = merge(merge(a, b), c).finalize();
  const VectorXd a_bc = merge(a, merge(b, c)).finalize();
  const VectorXd cb_a = merge(merge(c, b), a).finalize();
  const VectorXd ref = attend_naive(q, k, v, 0.3);
  EXPECT_LE((ab_c - ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((a_bc - ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((cb_a - ref).cwiseAbs().maxCoeff(), 1e-14);
  const auto e = SoftmaxState<double>::empty(8);
  EXPECT_EQ(merge(a, e).finalize(), a.finalize());
  EXPECT_EQ(merge(e, a).finalize(), a.finalize());
}

MatrixXd naive_causal(const MatrixXd& q, const MatrixXd& k, const MatrixXd& v, double scale) {
  MatrixXd out(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const MatrixXd ki = k.topRows(i + 1);
    const MatrixXd vi = v.topRows(i + 1);
    out.row(i) = attend_naive(VectorXd(q.row(i).transpose()), ki, vi, scale).transpose();
  }
  return out;
}

TEST(Prefill, TileSizesAgreeWithNaiveCausal) {
  SplitMix64 rng(21);
  const MatrixXd q = rand_mat(rng, 64, 16);
  const MatrixXd k = rand_mat(rng, 64, 16) * 2;
  const MatrixXd v = rand_mat(rng, 64, 16);
  const MatrixXd ref = naive_causal(q, k, v, 0.25);
  for (std::size_t tile : {1, 3, 16, 64}) {
    const MatrixXd got = prefill_attention_tiled<double>(q, k, v, tile, true);
    EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-10) << tile;
  }
  const MatrixXd whole = prefill_attention_tiled<double>(q, k, v, 64, true);
  EXPECT_EQ(whole, prefill_attention_tiled<double>(q, k, v, 1000, true));
}

TEST(Prefill, SingleRowAndNonCausal) {
  SplitMix64 rng(22);
  const MatrixXd q = rand_mat(rng, 1, 8);
  const MatrixXd k = rand_mat(rng, 1, 8);
  const MatrixXd v = rand_mat(rng, 1, 8);
  EXPECT_EQ(prefill_attention_tiled<double>(q, k, v, 4, true), v);
  const MatrixXd q2 = rand_mat(rng, 9, 8);
  const MatrixXd k2 = rand_mat(rng, 9, 8);
  const MatrixXd v2 = rand_mat(rng, 9, 8);
  const MatrixXd full = prefill_attention_tiled<double>(q2, k2, v2, 2, false);
  for (int i = 0; i < 9; ++i) {
    const VectorXd ref = attend_naive(VectorXd(q2.row(i).transpose()), k2, v2, 1.0 / std::sqrt(8.0));
    EXPECT_LE((full.row(i).transpose() - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(prefill_attention_tiled<double>(q2, k2, v2, 0, true), std::invalid_argument);
}

// ---------------------------------------------------------------- block

TEST(Block, ZeroWeightsZeroInput) {
  const auto cfg = preset("tiny");
  const auto w = BlockWeights<double>::zeros(cfg);
  KVCache<double> cache(2, 4);
  EXPECT_EQ(decoder_block_golden(VectorXd::Zero(8).eval(), w, cache, 0, cfg), VectorXd::Zero(8));
  EXPECT_EQ(cache.length(), 1u);
}

TEST(Block, CacheGrowsByOneAndStoresRotatedKeys) {
  const auto cfg = preset("tiny");
  const auto w = BlockWeights<double>::synthesize(cfg, 23);
  SplitMix64 rng(24);
  KVCache<double> cache(2, 4);
  for (std::size_t pos = 0; pos < 5; ++pos) {
    const VectorXd x = rand_vec(rng, 8);
    const auto qkv = qkv_project(layernorm_two_pass(x, w.ln1_gain, w.ln1_bias, cfg.ln_eps), w, cfg);
    decoder_block_golden(x, w, cache, pos, cfg);
    ASSERT_EQ(cache.length(), pos + 1);
    for (std::size_t h = 0; h < 2; ++h) {
      const auto r = static_cast<Eigen::Index>(h);
      const VectorXd k_rot = rope_partial(qkv.k.row(r).transpose(), pos, cfg.rotary_dims());
      EXPECT_EQ(VectorXd(cache.head(h).keys.row(static_cast<Eigen::Index>(pos)).transpose()), k_rot);
      EXPECT_EQ(VectorXd(cache.head(h).values.row(static_cast<Eigen::Index>(pos)).transpose()),
                VectorXd(qkv.v.row(r).transpose()));
    }
  }
  KVCache<double> wrong(2, 4);
  EXPECT_THROW(decoder_block_golden(VectorXd::Zero(8).eval(), w, wrong, 3, cfg), std::invalid_argument);
}

TEST(Block, ResidualFlagIsWired) {
  ModelConfig par = preset("tiny");
  ModelConfig seq = par;
  seq.parallel_residual = false;
  const auto w = BlockWeights<double>::synthesize(par, 25);
  SplitMix64 rng(26);
  const VectorXd x = rand_vec(rng, 8);
  KVCache<double> c1(2, 4), c2(2, 4);
  EXPECT_NE(decoder_block_golden(x, w, c1, 0, par), decoder_block_golden(x, w, c2, 0, seq));

  // With both branches zero, the two topologies agree.
  auto z = BlockWeights<double>::synthesize(par, 27);
  z.out_weight.setZero();
  z.out_bias.setZero();
  z.down_weight.setZero();
  z.down_bias.setZero();
  KVCache<double> c3(2, 4), c4(2, 4);
  EXPECT_EQ(decoder_block_golden(x, z, c3, 0, par), decoder_block_golden(x, z, c4, 0, seq));
}

// Long-double re-implementation of the whole block.
std::vector<LD> block_oracle(const VectorXd& x, const BlockWeights<double>& w, const ModelConfig& cfg,
                             std::vector<std::vector<std::vector<LD>>>& keys,
                             std::vector<std::vector<std::vector<LD>>>& values, std::size_t pos) {
  const int hdim = static_cast<int>(cfg.hidden);
  const int d = static_cast<int>(cfg.d_head);
  const int rd = static_cast<int>(cfg.rotary_dims());
  auto ln = [&](const std::vector<LD>& in, const VectorXd& g, const VectorXd& b) {
    LD mean = 0, var = 0;
    for (LD v : in) mean += v;
    mean /= hdim;
    for (LD v : in) var += (v - mean) * (v - mean);
    var /= hdim;
    std::vector<LD> out(in.size());
    for (int i = 0; i < hdim; ++i) out[i] = (in[i] - mean) / std::sqrt(var + cfg.ln_eps) * g[i] + b[i];
    return out;
  };
  auto rope = [&](std::vector<LD> v) {
    std::vector<LD> out = v;
    for (int i = 0; i < rd / 2; ++i) {
      const LD th = static_cast<LD>(pos) * std::pow(static_cast<LD>(cfg.rope_base), -2.0L * i / rd);
      out[i] = v[i] * std::cos(th) - v[i + rd / 2] * std::sin(th);
      out[i + rd / 2] = v[i] * std::sin(th) + v[i + rd / 2] * std::cos(th);
    }
    return out;
  };
  std::vector<LD> xs(x.data(), x.data() + hdim);
  const auto a = ln(xs, w.ln1_gain, w.ln1_bias);
  std::vector<LD> ctx(hdim);
  for (int h = 0; h < static_cast<int>(cfg.n_heads); ++h) {
    std::vector<LD> q(d), k(d), v(d);
    for (int j = 0; j < d; ++j) {
      for (int part = 0; part < 3; ++part) {
        const int row = h * 3 * d + part * d + j;
        LD s = w.qkv_bias[row];
        for (int c = 0; c < hdim; ++c) s += static_cast<LD>(w.qkv_weight(row, c)) * a[c];
        (part == 0 ? q : part == 1 ? k : v)[j] = s;
      }
    }
    q = rope(q);
    keys[h].push_back(rope(k));
    values[h].push_back(v);
    const LD scale = 1.0L / std::sqrt(static_cast<LD>(d));
    std::vector<LD> logits;
    LD mx = -1e300L;
    for (const auto& kk : keys[h]) {
      LD s = 0;
      for (int j = 0; j < d; ++j) s += q[j] * kk[j];
      logits.push_back(s * scale);
      mx = std::max(mx, logits.back());
    }
    LD den = 0;
    for (std::size_t t = 0; t < logits.size(); ++t) {
      const LD p = std::exp(logits[t] - mx);
      den += p;
      for (int j = 0; j < d; ++j) ctx[h * d + j] += p * values[h][t][j];
    }
    for (int j = 0; j < d; ++j) ctx[h * d + j] /= den;
  }
  std::vector<LD> attn(hdim);
  for (int i = 0; i < hdim; ++i) {
    LD s = w.out_bias[i];
    for (int j = 0; j < hdim; ++j) s += static_cast<LD>(w.out_weight(i, j)) * ctx[j];
    attn[i] = s;
  }
  std::vector<LD> h(hdim);
  for (int i = 0; i < hdim; ++i) h[i] = xs[i] + attn[i];
  const auto m = ln(cfg.parallel_residual ? xs : h, w.ln2_gain, w.ln2_bias);
  const int dm = static_cast<int>(cfg.d_mlp);
  std::vector<LD> act(dm);
  for (int i = 0; i < dm; ++i) {
    LD s = w.up_bias[i];
    for (int j = 0; j < hdim; ++j) s += static_cast<LD>(w.up_weight(i, j)) * m[j];
    act[i] = 0.5L * s * (1 + std::erf(s / std::sqrt(2.0L)));
  }
  std::vector<LD> y(hdim);
  for (int i = 0; i < hdim; ++i) {
    LD s = w.down_bias[i];
    for (int j = 0; j < dm; ++j) s += static_cast<LD>(w.down_weight(i, j)) * act[j];
    y[i] = h[i] + s;
  }
  return y;
}

TEST(Block, MatchesHighPrecisionOracle) {
  for (bool parallel : {true, false}) {
    ModelConfig cfg = preset("tiny");
    cfg.parallel_residual = parallel;
    const auto w = BlockWeights<double>::synthesize(cfg, 28);
    SplitMix64 rng(29);
    KVCache<double> cache(2, 4);
    std::vector<std::vector<std::vector<LD>>> keys(2), values(2);
    for (std::size_t pos = 0; pos < 8; ++pos) {
      const VectorXd x = rand_vec(rng, 8);
      const VectorXd got = decoder_block_golden(x, w, cache, pos, cfg);
      ASSERT_LE(max_abs_diff(got, block_oracle(x, w, cfg, keys, values, pos)), 1e-12);
    }
  }
}

// The fixture was recorded by `neoxsim golden --preset tiny --seed 7
// --set run.steps=6`; inputs, outputs and the final cache are stored as
// round-trip doubles.
TEST(Block, GoldenFixtureBitwise) {
  std::ifstream in(std::string(NEOXSIM_FIXTURE_DIR) + "/tiny_golden.json");
  ASSERT_TRUE(in);
  const auto doc = nlohmann::json::parse(in);
  const auto cfg = preset("tiny");
  ASSERT_EQ(doc.at("model").at("hidden").get<std::size_t>(), cfg.hidden);
  const auto w = BlockWeights<double>::synthesize(cfg, doc.at("seed").get<std::uint64_t>());
  KVCache<double> cache(cfg.n_heads, cfg.d_head);
  KVCache<double> composed_cache(cfg.n_heads, cfg.d_head);
  for (const auto& step : doc.at("steps")) {
    const auto pos = step.at("pos").get<std::size_t>();
    const auto in_vec = step.at("input").get<std::vector<double>>();
    const auto out_vec = step.at("output").get<std::vector<double>>();
    const VectorXd x = Eigen::Map<const VectorXd>(in_vec.data(), 8);
    const VectorXd expected = Eigen::Map<const VectorXd>(out_vec.data(), 8);
    ASSERT_EQ(decoder_block_golden(x, w, cache, pos, cfg), expected) << pos;

    // Manual composition of the individually tested sub-operations.
    const VectorXd a = layernorm_two_pass(x, w.ln1_gain, w.ln1_bias, cfg.ln_eps);
    const auto qkv = qkv_project(a, w, cfg);
    MatrixXd q(2, 4), k(2, 4);
    for (int h = 0; h < 2; ++h) {
      q.row(h) = rope_partial(qkv.q.row(h).transpose(), pos, cfg.rotary_dims()).transpose();
      k.row(h) = rope_partial(qkv.k.row(h).transpose(), pos, cfg.rotary_dims()).transpose();
    }
    composed_cache.append(k, qkv.v);
    VectorXd ctx(8);
    for (int h = 0; h < 2; ++h) {
      ctx.segment(h * 4, 4) = attend_naive(q.row(h).transpose(), composed_cache.head(h), cfg.attention_scale());
    }
    const VectorXd attn = w.out_weight * ctx + w.out_bias;
    const VectorXd m = layernorm_two_pass(x, w.ln2_gain, w.ln2_bias, cfg.ln_eps);
    const VectorXd y = x + attn + mlp(m, w, cfg.gelu);
    ASSERT_EQ(y, expected) << pos;
  }
  ASSERT_TRUE(cache == composed_cache);
  const auto& heads = doc.at("cache").at("heads");
  for (std::size_t h = 0; h < 2; ++h) {
    const MatrixXd keys = cache.head(h).keys;
    EXPECT_EQ(heads[h].at("keys").get<std::vector<double>>(),
              std::vector<double>(keys.data(), keys.data() + keys.size()));
  }
}

// ---------------------------------------------------------------- weights

TEST(Weights, SynthesisIsSeededAndFloat32) {
  const auto cfg = preset("tiny");
  const auto a = BlockWeights<double>::synthesize(cfg, 30);
  const auto b = BlockWeights<double>::synthesize(cfg, 30);
  const auto c = BlockWeights<double>::synthesize(cfg, 31);
  EXPECT_EQ(a.qkv_weight, b.qkv_weight);
  EXPECT_NE(a.qkv_weight, c.qkv_weight);
  a.for_each_tensor([](const char*, const double* d, Eigen::Index r, Eigen::Index cc) {
    for (Eigen::Index i = 0; i < r * cc; ++i) ASSERT_EQ(static_cast<double>(static_cast<float>(d[i])), d[i]);
  });
  EXPECT_NO_THROW(a.validate(cfg));
  EXPECT_EQ(a.ln1_gain.size(), 8);
  EXPECT_GE(a.ln1_gain.minCoeff(), 0.9);
}

TEST(Weights, ManifestRoundTrip) {
  const auto cfg = preset("tiny");
  const auto dir = std::filesystem::temp_directory_path() / "neoxsim_weights_test";
  std::filesystem::create_directories(dir);
  const auto w = BlockWeights<double>::synthesize(cfg, 32);
  save_weights(w, dir / "w.json", dir / "w.bin");
  const auto back = load_weights(cfg, dir / "w.json", dir / "w.bin");
  EXPECT_EQ(back.qkv_weight, w.qkv_weight);
  EXPECT_EQ(back.down_bias, w.down_bias);
  EXPECT_EQ(std::filesystem::file_size(dir / "w.bin"),
            4u * (2 * 8 + 24 * 8 + 24 + 64 + 8 + 2 * 8 + 16 * 8 + 16 + 8 * 16 + 8));

  const auto src = load_or_synthesize(cfg, dir / "w.json", dir / "missing.bin", 32);
  EXPECT_TRUE(src.synthesized);
  EXPECT_NE(src.notice.find("missing.bin"), std::string::npos);
  EXPECT_EQ(src.weights.qkv_weight, w.qkv_weight);
  const auto loaded = load_or_synthesize(cfg, dir / "w.json", dir / "w.bin", 99);
  EXPECT_FALSE(loaded.synthesized);

  try {
    load_weights(preset("pythia-2.8b"), dir / "w.json", dir / "w.bin");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("w.json"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(KVCache, AppendOnlyAndShapeChecked) {
  KVCache<double> c(2, 3);
  EXPECT_EQ(c.length(), 0u);
  c.append(MatrixXd::Ones(2, 3), MatrixXd::Zero(2, 3));
  EXPECT_EQ(c.length(), 1u);
  EXPECT_EQ(c.head(1).keys.rows(), 1);
  EXPECT_THROW(c.append(MatrixXd::Ones(3, 3), MatrixXd::Zero(2, 3)), std::invalid_argument);
}

}  // namespace
}  // namespace neoxsim
