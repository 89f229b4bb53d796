// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

// neoxsim: decoder-block fusion simulator and cost-model front end.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neoxsim/commands.hpp"
#include "neoxsim/config.hpp"
#include "neoxsim/run_config.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seq_lens;
  std::optional<std::string> measurements;
  std::optional<std::string> suites;
  std::optional<std::string> fault;
  std::vector<std::string> overrides;
};

neoxsim::RunConfig build_config(const Flags& f) {
  neoxsim::RunConfig cfg = f.config ? neoxsim::load_run_config(*f.config) : neoxsim::RunConfig{};
  if (f.preset) cfg.set("model.preset", *f.preset);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw neoxsim::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.out) cfg.set("run.out", *f.out);
  if (f.format) cfg.set("run.format", *f.format);
  if (f.seed) cfg.set("run.seed", std::to_string(*f.seed));
  if (f.seq_lens) cfg.set("run.seq_lens", *f.seq_lens);
  if (f.measurements) cfg.set("run.measurements", *f.measurements);
  if (f.suites) cfg.set("run.suites", *f.suites);
  if (f.fault) cfg.set("run.fault", *f.fault);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neoxsim: GPT-NeoX decoder-block fusion simulator"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Run config file (dotted key = value lines)");
  app.add_option("--preset", f.preset, "Model preset")
      ->check(CLI::IsMember(neoxsim::preset_names()));
  app.add_option("--out", f.out, "Output path (default: stdout)");
  app.add_option("--format", f.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", f.seed, "Base seed for weights, inputs and instances");
  app.add_option("--seq-lens", f.seq_lens, "Comma-separated decode-token sweep, e.g. 16,32,64");
  app.add_option("--measurements", f.measurements, "Measurements CSV for calibrate");
  app.add_option("--suites", f.suites, "Comma-separated verify suites (default: all)");
  app.add_option("--fault", f.fault, "Verify test hook: perturb the named suite's candidate");
  app.add_option("--set", f.overrides, "Config override key=value (repeatable)");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"golden", "Write a golden fixture for the configured block"},
      {"verify", "Run the oracle-equivalence suites"},
      {"cost", "Predicted TPOT / throughput per decode-token count"},
      {"ablate", "Kernel-split ablation at the last seq_len"},
      {"flops", "FLOPs estimate per decode-token count"},
      {"calibrate", "Fit the hardware model to measured TPOT"},
      {"fidelity", "Seed sweep of fused vs golden logits"},
      {"trace", "Per-kernel JSONL trace of simulated decode steps"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? neoxsim::kExitOk : neoxsim::kExitUsage;
  }

  neoxsim::RunConfig cfg;
  try {
    cfg = build_config(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return neoxsim::kExitUsage;
  }
  return neoxsim::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout, std::cerr);
}
