// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/commands.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "neoxsim/block.hpp"
#include "neoxsim/cluster.hpp"
#include "neoxsim/fidelity.hpp"
#include "neoxsim/flops.hpp"
#include "neoxsim/perfmodel.hpp"
#include "neoxsim/prng.hpp"

namespace neoxsim {

namespace {

using json = nlohmann::ordered_json;

json to_json(const ModelConfig& m) {
  return {{"name", m.name},
          {"hidden", m.hidden},
          {"n_heads", m.n_heads},
          {"d_head", m.d_head},
          {"n_layers", m.n_layers},
          {"d_mlp", m.d_mlp},
          {"rotary_pct", m.rotary_pct},
          {"ln_eps", m.ln_eps},
          {"vocab", m.vocab},
          {"parallel_residual", m.parallel_residual},
          {"rope_base", m.rope_base},
          {"gelu", to_string(m.gelu)}};
}

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd step_input(const RunConfig& cfg, std::size_t pos) {
  SplitMix64 rng(derive_seed(cfg.seed, {0x1b, pos}));
  VectorXd x(static_cast<Eigen::Index>(cfg.model.hidden));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

WeightSource block_weights(const RunConfig& cfg) {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> blob;
  if (!cfg.weights.empty()) {
    manifest = cfg.weights;
    blob = std::filesystem::path(cfg.weights).replace_extension(".bin");
  }
  return load_or_synthesize(cfg.model, manifest, blob, cfg.seed);
}

FusionPlan resolved_plan(const RunConfig& cfg) { return parse_plan(cfg.plan, cfg.graph_mode); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

std::vector<std::string> command_names() {
  return {"golden", "verify", "cost", "ablate", "flops", "calibrate", "fidelity", "trace"};
}

std::string emit(const Table& t, OutputFormat format) {
  return format == OutputFormat::Json ? t.to_json() : t.to_csv();
}

std::string cmd_golden(const RunConfig& cfg, std::string* notice) {
  const auto source = block_weights(cfg);
  if (notice) *notice = source.notice;
  KVCache<double> cache(cfg.model.n_heads, cfg.model.d_head);
  json steps = json::array();
  for (std::size_t pos = 0; pos < cfg.steps; ++pos) {
    const VectorXd x = step_input(cfg, pos);
    const VectorXd y = decoder_block_golden(x, source.weights, cache, pos, cfg.model);
    steps.push_back({{"pos", pos}, {"input", to_json(x)}, {"output", to_json(y)}});
  }
  json heads = json::array();
  for (std::size_t h = 0; h < cache.n_heads(); ++h) {
    const auto head = cache.head(h);
    const MatrixXd k = head.keys;
    const MatrixXd v = head.values;
    heads.push_back({{"keys", std::vector<double>(k.data(), k.data() + k.size())},
                     {"values", std::vector<double>(v.data(), v.data() + v.size())}});
  }
  const json doc = {{"format", "neoxsim-golden"},
                    {"version", 1},
                    {"model", to_json(cfg.model)},
                    {"seed", cfg.seed},
                    {"weights", source.synthesized ? "synthesized" : cfg.weights.string()},
                    {"steps", std::move(steps)},
                    {"cache", {{"length", cache.length()}, {"heads", std::move(heads)}}}};
  return doc.dump(1) + "\n";
}

std::vector<SuiteResult> cmd_verify(const RunConfig& cfg) {
  VerifyOptions opts;
  opts.suites = cfg.suites;
  opts.seed = cfg.seed;
  opts.fault = cfg.fault;
  return run_verify(opts);
}

Table cmd_cost(const RunConfig& cfg) {
  const auto base = FusionPlan::baseline();
  if (cfg.table == "plan") {
    const auto variant = resolved_plan(cfg);
    Table t({Column::number("decode_tokens", 0), Column::number("baseline_ms", 3),
             Column::number("variant_ms", 3), Column::number("speedup", 3)});
    for (std::size_t n : cfg.seq_lens) {
      const double b = step_time(base, cfg.model, cfg.hardware, n).tpot;
      const double v = step_time(variant, cfg.model, cfg.hardware, n).tpot;
      t.add_row({static_cast<double>(n), b * 1e3, v * 1e3, b / v});
    }
    return t;
  }
  const auto cf = FusionPlan::fused(false);
  const auto graph = FusionPlan::fused(true);
  const bool tpot = cfg.table == "tpot";
  const char* unit = tpot ? "_ms" : "_tok_s";
  Table t({Column::number("decode_tokens", 0), Column::number(std::string("hf") + unit, 2),
           Column::number(std::string("cf") + unit, 2), Column::number(std::string("cf_graph") + unit, 2),
           Column::number("cf_speedup", 2), Column::number("graph_speedup", 2)});
  for (std::size_t n : cfg.seq_lens) {
    const double h = step_time(base, cfg.model, cfg.hardware, n).tpot;
    const double c = step_time(cf, cfg.model, cfg.hardware, n).tpot;
    const double g = step_time(graph, cfg.model, cfg.hardware, n).tpot;
    if (tpot) {
      t.add_row({static_cast<double>(n), h * 1e3, c * 1e3, g * 1e3, h / c, h / g});
    } else {
      t.add_row({static_cast<double>(n), 1 / h, 1 / c, 1 / g, h / c, h / g});
    }
  }
  return t;
}

Table cmd_ablate(const RunConfig& cfg, std::vector<std::string>* notes) {
  const std::size_t seq = cfg.seq_lens.back();
  const auto report = ablate(cfg.model, cfg.hardware, seq);
  Table t({Column::label("configuration"), Column::number("tpot_ms", 2), Column::number("speedup", 2),
           Column::number("mlp_boundary_bytes", 0)});
  for (const auto& row : report.rows) {
    const auto tr = traffic(row.plan, cfg.model, seq, cfg.hardware.element_bytes);
    t.add_row({row.configuration, row.tpot * 1e3, row.speedup, tr.boundary_bytes.at("u")});
  }
  if (notes) {
    notes->push_back(fmt::format("decode tokens: {}", seq));
    notes->push_back(fmt::format("ordering fused < attention-only < baseline < mlp-down-only: {}",
                                 report.ordering_matches ? "yes" : "no"));
    notes->push_back(fmt::format(
        "MLP intermediate boundary traffic removed by fusion: {:.0f} bytes = {:.3e} s at {:.3g} B/s "
        "({:.3f} us; quoting this figure in milliseconds overstates it by 1000x)",
        report.mlp_intermediate_bytes, report.mlp_intermediate_seconds, cfg.hardware.bandwidth,
        report.mlp_intermediate_seconds * 1e6));
  }
  return t;
}

Table cmd_flops(const RunConfig& cfg) {
  Table t({Column::number("decode_tokens", 0), Column::number("prefill_gflops", 2),
           Column::number("decode_gflops", 2), Column::number("total_gflops", 2),
           Column::number("tflops_cf_graph", 2)});
  const auto graph = FusionPlan::fused(true);
  for (std::size_t n : cfg.seq_lens) {
    const auto f = flops(cfg.model, cfg.prompt_len, n);
    const double seconds = static_cast<double>(n) * step_time(graph, cfg.model, cfg.hardware, n).tpot;
    t.add_row({static_cast<double>(n), f.prefill * 1e-9, f.decode * 1e-9, f.total() * 1e-9,
               f.total() / seconds * 1e-12});
  }
  return t;
}

Table cmd_calibrate(const RunConfig& cfg, HardwareModel* fitted) {
  if (cfg.measurements.empty()) {
    throw ConfigError("calibrate requires a measurements CSV (run.measurements or --measurements)");
  }
  std::ifstream in(cfg.measurements);
  if (!in) throw ConfigError(cfg.measurements.string() + ": cannot open measurements file");
  std::vector<Measurement> rows;
  try {
    rows = parse_measurements_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.measurements.string() + ": " + e.what());
  }
  HardwareModel initial = reference_hardware();
  initial.bandwidth = cfg.hardware.bandwidth;
  initial.element_bytes = cfg.hardware.element_bytes;
  Calibration cal;
  try {
    cal = staged_calibration(cfg.model, initial, rows);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (fitted) *fitted = cal.hw;
  Table t({Column::label("variant"), Column::number("decode_tokens", 0), Column::number("measured_ms", 2),
           Column::number("predicted_ms", 3), Column::number("rel_error", 4)});
  for (const auto& r : cal.rows) {
    t.add_row({r.variant, static_cast<double>(r.seq_len), r.measured * 1e3, r.predicted * 1e3,
               r.rel_error});
  }
  return t;
}

Table cmd_fidelity(const RunConfig& cfg) {
  const FidelityInstance inst =
      cfg.instance == "adversarial"
          ? FidelityInstance::adversarial(cfg.steps, cfg.cluster.reduction)
          : FidelityInstance::random(cfg.model, cfg.seed, cfg.steps, cfg.vocab, cfg.cluster);
  FidelityInstance run = inst;
  if (cfg.instance == "adversarial") {
    run.spec.accumulation_precision = cfg.cluster.accumulation_precision;
  }
  run.plan = resolved_plan(cfg);
  const auto sweep = seed_sweep(run, cfg.seeds, cfg.topk);
  Table t({Column::label("metric"), Column::number("min", 6), Column::number("mean", 6),
           Column::number("max", 6)});
  auto add = [&](const std::string& name, const MetricSummary& s) {
    t.add_row({name, s.min, s.mean, s.max});
  };
  add("token_match_rate", sweep.token_match_rate);
  add("logits_mae", sweep.logits_mae);
  for (const auto& [k, s] : sweep.topk_agreement) add(fmt::format("top{}_agreement", k), s);
  const auto distinct = static_cast<double>(sweep.distinct_outputs);
  t.add_row({std::string("distinct_outputs"), distinct, distinct, distinct});
  return t;
}

std::string cmd_trace(const RunConfig& cfg) {
  const auto source = block_weights(cfg);
  const auto plan = resolved_plan(cfg);
  KVCache<double> cache(cfg.model.n_heads, cfg.model.d_head);
  std::string out;
  for (std::size_t pos = 0; pos < cfg.steps; ++pos) {
    const auto step =
        fused_block_step(step_input(cfg, pos), source.weights, cache, pos, cfg.model, cfg.cluster, plan);
    out += trace_jsonl(step.trace);
  }
  return out;
}

std::string hardware_config_lines(const HardwareModel& hw) {
  std::string out;
  out += fmt::format("hardware.bandwidth = {:.17g}\n", hw.bandwidth);
  out += fmt::format("hardware.launch_overhead = {:.17g}\n", hw.launch_overhead);
  out += fmt::format("hardware.descriptor_cost = {:.17g}\n", hw.descriptor_cost);
  out += fmt::format("hardware.graph_replay_overhead = {:.17g}\n", hw.graph_replay_overhead);
  for (std::size_t i = 0; i < kKernelClassCount; ++i) {
    out += fmt::format("hardware.efficiency.{} = {:.17g}\n", to_string(static_cast<KernelClass>(i)),
                       hw.efficiency[i]);
  }
  out += fmt::format("hardware.element_bytes = {}\n", hw.element_bytes);
  return out;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::string text;
  int code = kExitOk;
  try {
    cfg.validate();
    if (name == "golden") {
      std::string notice;
      text = cmd_golden(cfg, &notice);
      if (!notice.empty()) err << "notice: " << notice << "\n";
    } else if (name == "verify") {
      const auto results = cmd_verify(cfg);
      Table t({Column::label("suite"), Column::label("status"), Column::number("checks", 0),
               Column::number("worst_error_ratio", 6), Column::number("seconds", 3)});
      for (const auto& r : results) {
        t.add_row({r.name, std::string(r.passed ? "pass" : "FAIL"), static_cast<double>(r.checks),
                   std::isfinite(r.worst_ratio) ? r.worst_ratio : 1e300, r.seconds});
        if (!r.passed) {
          err << "verify: suite " << r.name << " failed: " << r.detail << "\n";
          code = kExitVerifyFailed;
        }
      }
      text = emit(t, cfg.format);
    } else if (name == "cost") {
      text = emit(cmd_cost(cfg), cfg.format);
    } else if (name == "ablate") {
      std::vector<std::string> notes;
      text = emit(cmd_ablate(cfg, &notes), cfg.format);
      for (const auto& n : notes) err << n << "\n";
    } else if (name == "flops") {
      text = emit(cmd_flops(cfg), cfg.format);
      err << "prompt length: " << cfg.prompt_len << " tokens\n";
    } else if (name == "calibrate") {
      HardwareModel hw;
      text = emit(cmd_calibrate(cfg, &hw), cfg.format);
      err << "fitted hardware model:\n" << hardware_config_lines(hw);
    } else if (name == "fidelity") {
      text = emit(cmd_fidelity(cfg), cfg.format);
    } else if (name == "trace") {
      text = cmd_trace(cfg);
    } else {
      err << "error: unknown command '" << name << "'\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (cfg.out.empty()) {
    out << text;
  } else {
    try {
      write_text(cfg.out, text);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  return code;
}

}  // namespace neoxsim
