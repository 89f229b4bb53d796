// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_COMMANDS_HPP
#define NEOXSIM_COMMANDS_HPP

#include <ostream>
#include <string>
#include <vector>

#include "neoxsim/calibrate.hpp"
#include "neoxsim/run_config.hpp"
#include "neoxsim/table.hpp"
#include "neoxsim/verify.hpp"

namespace neoxsim {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitUsage = 2 };

/// Golden fixture for `cfg.steps` decode steps of one block: config, seeds,
/// per-step inputs and outputs, and the final KV cache, as JSON with
/// round-trip doubles. `notice` receives the weight-fallback message, if any.
std::string cmd_golden(const RunConfig& cfg, std::string* notice = nullptr);

std::vector<SuiteResult> cmd_verify(const RunConfig& cfg);

/// tpot:       decode_tokens, hf_ms, cf_ms, cf_graph_ms, cf_speedup, graph_speedup
/// throughput: decode_tokens, hf_tok_s, cf_tok_s, cf_graph_tok_s, cf_speedup, graph_speedup
/// plan:       decode_tokens, baseline_ms, variant_ms, speedup (variant = cfg.plan)
Table cmd_cost(const RunConfig& cfg);

/// configuration, tpot_ms, speedup, mlp_boundary_bytes at the last seq_len.
/// `notes` receives the boundary-saving summary.
Table cmd_ablate(const RunConfig& cfg, std::vector<std::string>* notes = nullptr);

/// decode_tokens, prefill_gflops, decode_gflops, total_gflops, tflops_cf_graph
Table cmd_flops(const RunConfig& cfg);

/// variant, decode_tokens, measured_ms, predicted_ms, rel_error. `fitted`
/// receives the calibrated hardware model.
Table cmd_calibrate(const RunConfig& cfg, HardwareModel* fitted = nullptr);

/// metric, min, mean, max over the seed sweep.
Table cmd_fidelity(const RunConfig& cfg);

/// One JSON line per simulated kernel per step.
std::string cmd_trace(const RunConfig& cfg);

/// Renders a table in the configured format.
std::string emit(const Table& t, OutputFormat format);

/// Dispatches a subcommand, writing results to cfg.out (or `out`) and
/// diagnostics to `err`. Returns an ExitCode.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& err);

std::vector<std::string> command_names();

/// Configuration lines reproducing `hw`.
std::string hardware_config_lines(const HardwareModel& hw);

}  // namespace neoxsim

#endif  // NEOXSIM_COMMANDS_HPP
