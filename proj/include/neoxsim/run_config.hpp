// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_RUN_CONFIG_HPP
#define NEOXSIM_RUN_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "neoxsim/cluster.hpp"
#include "neoxsim/config.hpp"
#include "neoxsim/perfmodel.hpp"

namespace neoxsim {

/// Raised for malformed or inconsistent configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, Json };

struct RunConfig {
  ModelConfig model = preset("pythia-2.8b");
  /// Starts from the shipped calibration; hardware.* keys override fields.
  HardwareModel hardware;
  std::string plan = "fused";
  bool graph_mode = true;
  ClusterSpec cluster;
  std::vector<std::size_t> seq_lens = {16, 32, 64, 128, 256, 512, 1024, 2048};
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // fidelity sweep; default 0..99
  std::size_t prompt_len = 5;
  OutputFormat format = OutputFormat::Csv;
  std::filesystem::path out;          // empty: stdout
  std::filesystem::path weights;      // manifest for golden; empty: synthesize
  std::filesystem::path measurements; // calibrate input
  std::vector<std::string> suites;    // verify; default all
  std::string table = "tpot";         // cost: tpot | throughput | plan
  std::string fault;                  // verify fault-injection hook
  std::string instance = "random";    // fidelity: random | adversarial
  std::size_t steps = 8;
  std::size_t vocab = 64;
  std::vector<std::size_t> topk = {1, 5, 10};

  RunConfig();

  /// Applies one dotted key. Throws ConfigError on unknown keys or bad
  /// values. model.preset resets every model field.
  void set(const std::string& key, const std::string& value);

  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. model.preset is applied
/// before any other key regardless of position. Errors carry the line number.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// "16,32,64" or inclusive ranges "0-99"; mixing is allowed. Throws
/// std::invalid_argument on malformed items, empty ranges or empty lists.
std::vector<std::uint64_t> parse_uint_list(const std::string& s);

}  // namespace neoxsim

#endif  // NEOXSIM_RUN_CONFIG_HPP
