// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_CALIBRATE_HPP
#define NEOXSIM_CALIBRATE_HPP

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "neoxsim/config.hpp"
#include "neoxsim/perfmodel.hpp"
#include "neoxsim/plan.hpp"

namespace neoxsim {

enum class HwParam {
  EffLibraryGemm,
  EffLibraryAttention,
  EffFusedCluster,
  EffMlpDownStandalone,
  LaunchOverhead,
  DescriptorCost,
  GraphReplayOverhead,
};

std::string to_string(HwParam p);
HwParam parse_hw_param(const std::string& s);

/// One measured TPOT row. Variants: hf (library baseline), cf (fused),
/// cf_graph (fused, graph mode), attn_only, mlp_only.
struct Measurement {
  std::size_t seq_len = 0;
  double tpot_seconds = 0;
  std::string variant;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

FusionPlan plan_for_variant(const std::string& variant);

/// CSV with header seq_len,tpot_ms,variant (any column order). Malformed
/// input throws std::invalid_argument naming the row and column.
std::vector<Measurement> parse_measurements_csv(std::istream& in);

struct FitRow {
  std::size_t seq_len = 0;
  std::string variant;
  double measured = 0;
  double predicted = 0;
  double rel_error = 0;
};

struct Calibration {
  HardwareModel hw;
  std::vector<FitRow> rows;

  double max_rel_error() const;
  double max_rel_error(const std::string& variant) const;
};

/// Relative least squares over the rows: minimizes sum((pred - meas)/meas)^2
/// in the free parameters, holding the rest of `initial` fixed. The model is
/// linear in 1/efficiency and the overheads, so this is a non-negative
/// least-squares problem (efficiency <= 1, overheads >= 0) solved exactly.
/// Throws std::invalid_argument when there are fewer rows than free
/// parameters or a free parameter is untouched by every row.
Calibration calibrate(const ModelConfig& cfg, const HardwareModel& initial,
                      std::span<const HwParam> free, std::span<const Measurement> measured);

/// Published measurements for pythia-2.8b on a 1.8 TB/s part: hf, cf and
/// cf_graph TPOT plus the standalone attention and MLP-down kernels.
std::vector<Measurement> reference_measurements();

/// Untuned starting point: 1.8 TB/s, 2-byte elements, unit efficiency, no
/// overheads.
HardwareModel reference_hardware();

/// Fits in two stages. First the library, fused and overhead parameters
/// against whichever of hf, cf and cf_graph are present. Then the standalone
/// MLP-down efficiency against mlp_only rows, with everything else held.
/// attn_only rows are predicted but not fitted.
Calibration staged_calibration(const ModelConfig& cfg, const HardwareModel& initial,
                               std::span<const Measurement> measured);

/// staged_calibration of pythia-2.8b on reference_measurements().
Calibration shipped_calibration();
HardwareModel shipped_hardware();

}  // namespace neoxsim

#endif  // NEOXSIM_CALIBRATE_HPP
