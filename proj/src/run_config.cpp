// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "neoxsim/calibrate.hpp"
#include "neoxsim/plan.hpp"
#include "neoxsim/verify.hpp"

namespace neoxsim {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::uint64_t to_uint(const std::string& s) {
  const auto fail = [&] { return std::invalid_argument("expected a non-negative integer, got '" + s + "'"); };
  if (s.empty() || s[0] == '-') throw fail();
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw fail();
  }
  if (used != s.size()) throw fail();
  return v;
}

double to_double(const std::string& s) {
  const auto fail = [&] { return std::invalid_argument("expected a number, got '" + s + "'"); };
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw fail();
  }
  if (used != s.size()) throw fail();
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<std::string> to_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ReductionStrategy to_reduction(const std::string& s, std::uint64_t seed) {
  if (s == "ring") return ReductionStrategy::ring();
  if (s == "tree") return ReductionStrategy::tree();
  if (s == "permuted_atomic") return ReductionStrategy::permuted_atomic(seed);
  throw std::invalid_argument("expected ring, tree or permuted_atomic");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["model.preset"] = [](RunConfig& c, const std::string& v) { c.model = preset(v); };
    m["model.name"] = [](RunConfig& c, const std::string& v) { c.model.name = v; };
    m["model.hidden"] = [](RunConfig& c, const std::string& v) { c.model.hidden = to_uint(v); };
    m["model.n_heads"] = [](RunConfig& c, const std::string& v) { c.model.n_heads = to_uint(v); };
    m["model.d_head"] = [](RunConfig& c, const std::string& v) { c.model.d_head = to_uint(v); };
    m["model.n_layers"] = [](RunConfig& c, const std::string& v) { c.model.n_layers = to_uint(v); };
    m["model.d_mlp"] = [](RunConfig& c, const std::string& v) { c.model.d_mlp = to_uint(v); };
    m["model.rotary_pct"] = [](RunConfig& c, const std::string& v) { c.model.rotary_pct = to_double(v); };
    m["model.ln_eps"] = [](RunConfig& c, const std::string& v) { c.model.ln_eps = to_double(v); };
    m["model.vocab"] = [](RunConfig& c, const std::string& v) { c.model.vocab = to_uint(v); };
    m["model.parallel_residual"] = [](RunConfig& c, const std::string& v) {
      c.model.parallel_residual = to_bool(v);
    };
    m["model.rope_base"] = [](RunConfig& c, const std::string& v) { c.model.rope_base = to_double(v); };
    m["model.gelu"] = [](RunConfig& c, const std::string& v) { c.model.gelu = parse_gelu(v); };

    m["hardware.calibration"] = [](RunConfig& c, const std::string& v) {
      if (v == "shipped") {
        c.hardware = shipped_hardware();
      } else if (v == "reference") {
        c.hardware = reference_hardware();
      } else {
        throw std::invalid_argument("expected shipped or reference");
      }
    };
    m["hardware.bandwidth"] = [](RunConfig& c, const std::string& v) { c.hardware.bandwidth = to_double(v); };
    m["hardware.launch_overhead"] = [](RunConfig& c, const std::string& v) {
      c.hardware.launch_overhead = to_double(v);
    };
    m["hardware.descriptor_cost"] = [](RunConfig& c, const std::string& v) {
      c.hardware.descriptor_cost = to_double(v);
    };
    m["hardware.graph_replay_overhead"] = [](RunConfig& c, const std::string& v) {
      c.hardware.graph_replay_overhead = to_double(v);
    };
    m["hardware.element_bytes"] = [](RunConfig& c, const std::string& v) {
      c.hardware.element_bytes = to_uint(v);
    };
    for (std::size_t i = 0; i < kKernelClassCount; ++i) {
      const auto cls = static_cast<KernelClass>(i);
      m["hardware.efficiency." + to_string(cls)] = [cls](RunConfig& c, const std::string& v) {
        c.hardware.efficiency_of(cls) = to_double(v);
      };
    }

    m["plan.name"] = [](RunConfig& c, const std::string& v) { c.plan = v; };
    m["plan.graph"] = [](RunConfig& c, const std::string& v) { c.graph_mode = to_bool(v); };

    m["cluster.n_blocks"] = [](RunConfig& c, const std::string& v) { c.cluster.n_blocks = to_uint(v); };
    m["cluster.reduction"] = [](RunConfig& c, const std::string& v) {
      c.cluster.reduction = to_reduction(v, c.cluster.reduction.seed);
    };
    m["cluster.reduction_seed"] = [](RunConfig& c, const std::string& v) {
      c.cluster.reduction.seed = to_uint(v);
    };
    m["cluster.precision"] = [](RunConfig& c, const std::string& v) {
      c.cluster.accumulation_precision = parse_precision(v);
    };
    m["cluster.atomic_seed"] = [](RunConfig& c, const std::string& v) {
      c.cluster.atomic_seed = to_uint(v);
    };

    m["run.seq_lens"] = [](RunConfig& c, const std::string& v) {
      const auto xs = parse_uint_list(v);
      c.seq_lens.assign(xs.begin(), xs.end());
    };
    m["run.seed"] = [](RunConfig& c, const std::string& v) { c.seed = to_uint(v); };
    m["run.seeds"] = [](RunConfig& c, const std::string& v) { c.seeds = parse_uint_list(v); };
    m["run.prompt_len"] = [](RunConfig& c, const std::string& v) { c.prompt_len = to_uint(v); };
    m["run.format"] = [](RunConfig& c, const std::string& v) {
      if (v == "csv") {
        c.format = OutputFormat::Csv;
      } else if (v == "json") {
        c.format = OutputFormat::Json;
      } else {
        throw std::invalid_argument("expected csv or json");
      }
    };
    m["run.out"] = [](RunConfig& c, const std::string& v) { c.out = v; };
    m["run.weights"] = [](RunConfig& c, const std::string& v) { c.weights = v; };
    m["run.measurements"] = [](RunConfig& c, const std::string& v) { c.measurements = v; };
    m["run.suites"] = [](RunConfig& c, const std::string& v) { c.suites = to_list(v); };
    m["run.table"] = [](RunConfig& c, const std::string& v) {
      if (v != "tpot" && v != "throughput" && v != "plan") {
        throw std::invalid_argument("expected tpot, throughput or plan");
      }
      c.table = v;
    };
    m["run.fault"] = [](RunConfig& c, const std::string& v) { c.fault = v; };
    m["run.instance"] = [](RunConfig& c, const std::string& v) {
      if (v != "random" && v != "adversarial") throw std::invalid_argument("expected random or adversarial");
      c.instance = v;
    };
    m["run.steps"] = [](RunConfig& c, const std::string& v) { c.steps = to_uint(v); };
    m["run.vocab"] = [](RunConfig& c, const std::string& v) { c.vocab = to_uint(v); };
    m["run.topk"] = [](RunConfig& c, const std::string& v) {
      const auto xs = parse_uint_list(v);
      c.topk.assign(xs.begin(), xs.end());
    };
    return m;
  }();
  return table;
}

}  // namespace

RunConfig::RunConfig() : hardware(shipped_hardware()), seeds(100), suites(verify_suite_names()) {
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second(*this, unquote(trim(value)));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what() + " (got '" + value + "')");
  }
}

void RunConfig::validate() const {
  try {
    model.validate();
    hardware.validate();
    cluster.validate();
    parse_plan(plan, graph_mode);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (seq_lens.empty()) throw ConfigError("run.seq_lens must not be empty");
  if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
  if (topk.empty()) throw ConfigError("run.topk must not be empty");
  if (steps == 0) throw ConfigError("run.steps must be positive");
  if (vocab == 0) throw ConfigError("run.vocab must be positive");
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  struct Entry {
    std::size_t line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    entries.push_back({line_no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  std::stable_partition(entries.begin(), entries.end(),
                        [](const Entry& e) { return e.key == "model.preset"; });
  RunConfig cfg;
  for (const auto& e : entries) {
    try {
      cfg.set(e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(origin + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::vector<std::uint64_t> parse_uint_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : to_list(s)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(to_uint(item));
      continue;
    }
    const auto lo = to_uint(trim(item.substr(0, dash)));
    const auto hi = to_uint(trim(item.substr(dash + 1)));
    if (hi < lo) throw std::invalid_argument("empty range '" + item + "'");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace neoxsim
