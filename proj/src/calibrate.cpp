// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/calibrate.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "neoxsim/nnls.hpp"

namespace neoxsim {

namespace {

constexpr std::array<HwParam, kTpotTermCount> kAllParams = {
    HwParam::EffLibraryGemm,  HwParam::EffLibraryAttention, HwParam::EffFusedCluster,
    HwParam::EffMlpDownStandalone, HwParam::LaunchOverhead, HwParam::DescriptorCost,
    HwParam::GraphReplayOverhead};

bool is_efficiency(HwParam p) { return static_cast<std::size_t>(p) < kKernelClassCount; }

// theta: 1/eff for efficiencies, raw seconds for overheads.
double theta_of(const HardwareModel& hw, HwParam p) {
  switch (p) {
    case HwParam::LaunchOverhead: return hw.launch_overhead;
    case HwParam::DescriptorCost: return hw.descriptor_cost;
    case HwParam::GraphReplayOverhead: return hw.graph_replay_overhead;
    default: return 1.0 / hw.efficiency[static_cast<std::size_t>(p)];
  }
}

void set_theta(HardwareModel& hw, HwParam p, double theta) {
  switch (p) {
    case HwParam::LaunchOverhead: hw.launch_overhead = theta; break;
    case HwParam::DescriptorCost: hw.descriptor_cost = theta; break;
    case HwParam::GraphReplayOverhead: hw.graph_replay_overhead = theta; break;
    default: hw.efficiency[static_cast<std::size_t>(p)] = 1.0 / theta; break;
  }
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::string to_string(HwParam p) {
  switch (p) {
    case HwParam::EffLibraryGemm: return "eff_library_gemm";
    case HwParam::EffLibraryAttention: return "eff_library_attention";
    case HwParam::EffFusedCluster: return "eff_fused_cluster";
    case HwParam::EffMlpDownStandalone: return "eff_mlp_down_standalone";
    case HwParam::LaunchOverhead: return "launch_overhead";
    case HwParam::DescriptorCost: return "descriptor_cost";
    case HwParam::GraphReplayOverhead: return "graph_replay_overhead";
  }
  return "?";
}

HwParam parse_hw_param(const std::string& s) {
  for (HwParam p : kAllParams) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown hardware parameter '" + s + "'");
}

FusionPlan plan_for_variant(const std::string& variant) {
  if (variant == "hf" || variant == "baseline") return FusionPlan::baseline();
  if (variant == "cf") return FusionPlan::fused(false);
  if (variant == "cf_graph") return FusionPlan::fused(true);
  if (variant == "attn_only") return FusionPlan::attention_only();
  if (variant == "mlp_only") return FusionPlan::mlp_down_only();
  throw std::invalid_argument("unknown measurement variant '" + variant +
                              "' (expected hf|cf|cf_graph|attn_only|mlp_only)");
}

std::vector<Measurement> parse_measurements_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  const auto header = split(line);
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::invalid_argument("measurements csv: header lacks column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_seq = column("seq_len");
  const std::size_t c_tpot = column("tpot_ms");
  const std::size_t c_var = column("variant");

  std::vector<Measurement> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    auto where = [&](const std::string& col) {
      return "measurements csv: line " + std::to_string(line_no) + ", column '" + col + "'";
    };
    if (cells.size() != header.size()) {
      throw std::invalid_argument("measurements csv: line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
    }
    Measurement m;
    try {
      std::size_t used = 0;
      const long long seq = std::stoll(cells[c_seq], &used);
      if (used != cells[c_seq].size() || seq < 0) throw std::invalid_argument("bad");
      m.seq_len = static_cast<std::size_t>(seq);
    } catch (const std::exception&) {
      throw std::invalid_argument(where("seq_len") + ": not a non-negative integer: '" +
                                  cells[c_seq] + "'");
    }
    try {
      std::size_t used = 0;
      const double ms = std::stod(cells[c_tpot], &used);
      if (used != cells[c_tpot].size() || !(ms > 0)) throw std::invalid_argument("bad");
      m.tpot_seconds = ms * 1e-3;
    } catch (const std::exception&) {
      throw std::invalid_argument(where("tpot_ms") + ": not a positive number: '" +
                                  cells[c_tpot] + "'");
    }
    m.variant = cells[c_var];
    try {
      plan_for_variant(m.variant);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where("variant") + ": " + e.what());
    }
    rows.push_back(std::move(m));
  }
  return rows;
}

double Calibration::max_rel_error() const {
  double worst = 0;
  for (const auto& r : rows) worst = std::max(worst, std::fabs(r.rel_error));
  return worst;
}

double Calibration::max_rel_error(const std::string& variant) const {
  double worst = 0;
  for (const auto& r : rows) {
    if (r.variant == variant) worst = std::max(worst, std::fabs(r.rel_error));
  }
  return worst;
}

Calibration calibrate(const ModelConfig& cfg, const HardwareModel& initial,
                      std::span<const HwParam> free, std::span<const Measurement> measured) {
  initial.validate();
  std::vector<HwParam> params(free.begin(), free.end());
  std::sort(params.begin(), params.end());
  params.erase(std::unique(params.begin(), params.end()), params.end());
  if (params.empty()) throw std::invalid_argument("calibrate: no free parameters");
  if (measured.size() < params.size()) {
    std::string names;
    for (HwParam p : params) names += (names.empty() ? "" : ", ") + to_string(p);
    throw std::invalid_argument("underdetermined fit: " + std::to_string(params.size()) +
                                " free parameters (" + names + ") but " +
                                std::to_string(measured.size()) + " measurement rows");
  }

  const auto rows = static_cast<Eigen::Index>(measured.size());
  const auto cols = static_cast<Eigen::Index>(params.size());
  Eigen::MatrixXd a(rows, cols);
  Eigen::VectorXd b(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& m = measured[static_cast<std::size_t>(i)];
    const auto terms = tpot_terms(plan_for_variant(m.variant), cfg, initial.bandwidth,
                                  initial.element_bytes, m.seq_len);
    // Fixed parameters move to the right-hand side; efficiencies are
    // solved as theta = 1 + z with z >= 0.
    double rhs = m.tpot_seconds;
    for (std::size_t t = 0; t < kTpotTermCount; ++t) {
      const HwParam p = kAllParams[t];
      const bool is_free = std::binary_search(params.begin(), params.end(), p);
      if (!is_free) {
        rhs -= terms[t] * theta_of(initial, p);
      } else if (is_efficiency(p)) {
        rhs -= terms[t];
      }
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      a(i, j) = terms[static_cast<std::size_t>(params[static_cast<std::size_t>(j)])] /
                m.tpot_seconds;
    }
    b[i] = rhs / m.tpot_seconds;
  }

  Eigen::VectorXd scale(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    scale[j] = a.col(j).norm();
    if (scale[j] == 0) {
      throw std::invalid_argument("calibrate: free parameter " +
                                  to_string(params[static_cast<std::size_t>(j)]) +
                                  " is not constrained by any measurement row");
    }
  }
  const Eigen::VectorXd z = nnls(a * scale.cwiseInverse().asDiagonal(), b).cwiseQuotient(scale);

  Calibration result;
  result.hw = initial;
  for (Eigen::Index j = 0; j < cols; ++j) {
    const HwParam p = params[static_cast<std::size_t>(j)];
    set_theta(result.hw, p, is_efficiency(p) ? 1.0 + z[j] : z[j]);
  }
  for (const auto& m : measured) {
    const double pred = step_time(plan_for_variant(m.variant), cfg, result.hw, m.seq_len).tpot;
    result.rows.push_back(
        {m.seq_len, m.variant, m.tpot_seconds, pred, (pred - m.tpot_seconds) / m.tpot_seconds});
  }
  return result;
}

std::vector<Measurement> reference_measurements() {
  const std::array<std::size_t, 8> seq = {16, 32, 64, 128, 256, 512, 1024, 2048};
  const std::array<double, 8> hf = {5.69, 5.70, 5.84, 5.76, 5.82, 5.98, 6.23, 6.60};
  const std::array<double, 8> cf = {5.11, 5.11, 5.16, 5.11, 5.15, 5.17, 5.23, 5.31};
  const std::array<double, 8> cf_graph = {4.70, 4.69, 4.69, 4.69, 4.74, 4.76, 4.81, 4.91};
  const std::array<double, 8> attn_only = {5.23, 5.25, 5.29, 5.26, 5.29, 5.33, 5.39, 5.50};
  const std::array<double, 8> mlp_only = {8.96, 9.01, 9.12, 9.02, 9.03, 9.04, 9.06, 9.04};
  std::vector<Measurement> rows;
  auto add = [&](const std::array<double, 8>& ms, const char* variant) {
    for (std::size_t i = 0; i < seq.size(); ++i) rows.push_back({seq[i], ms[i] * 1e-3, variant});
  };
  add(hf, "hf");
  add(cf, "cf");
  add(cf_graph, "cf_graph");
  add(attn_only, "attn_only");
  add(mlp_only, "mlp_only");
  return rows;
}

HardwareModel reference_hardware() { return HardwareModel{}; }

Calibration staged_calibration(const ModelConfig& cfg, const HardwareModel& initial,
                               std::span<const Measurement> measured) {
  std::vector<Measurement> tpot_rows;
  std::vector<Measurement> mlp_rows;
  bool has[3] = {false, false, false};
  for (const auto& m : measured) {
    if (m.variant == "hf" || m.variant == "cf" || m.variant == "cf_graph") tpot_rows.push_back(m);
    if (m.variant == "mlp_only") mlp_rows.push_back(m);
    has[0] |= m.variant == "hf";
    has[1] |= m.variant == "cf";
    has[2] |= m.variant == "cf_graph";
  }
  std::vector<HwParam> stage1;
  if (has[0]) {
    stage1.push_back(HwParam::EffLibraryGemm);
    stage1.push_back(HwParam::EffLibraryAttention);
  }
  if (has[1] || has[2]) stage1.push_back(HwParam::EffFusedCluster);
  if (!tpot_rows.empty()) stage1.push_back(HwParam::LaunchOverhead);
  if (has[1]) stage1.push_back(HwParam::DescriptorCost);
  if (has[2]) stage1.push_back(HwParam::GraphReplayOverhead);

  HardwareModel hw = initial;
  if (!stage1.empty()) hw = calibrate(cfg, hw, stage1, tpot_rows).hw;
  if (!mlp_rows.empty()) {
    const std::array<HwParam, 1> stage2 = {HwParam::EffMlpDownStandalone};
    hw = calibrate(cfg, hw, stage2, mlp_rows).hw;
  }
  if (stage1.empty() && mlp_rows.empty()) {
    throw std::invalid_argument("calibrate: no hf, cf, cf_graph or mlp_only rows to fit");
  }

  Calibration combined;
  combined.hw = hw;
  for (const auto& m : measured) {
    const double pred = step_time(plan_for_variant(m.variant), cfg, hw, m.seq_len).tpot;
    combined.rows.push_back(
        {m.seq_len, m.variant, m.tpot_seconds, pred, (pred - m.tpot_seconds) / m.tpot_seconds});
  }
  return combined;
}

Calibration shipped_calibration() {
  const auto rows = reference_measurements();
  return staged_calibration(preset("pythia-2.8b"), reference_hardware(), rows);
}

HardwareModel shipped_hardware() {
  static const HardwareModel hw = shipped_calibration().hw;
  return hw;
}

}  // namespace neoxsim
