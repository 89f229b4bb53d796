// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "neoxsim/commands.hpp"
#include "neoxsim/perfmodel.hpp"

namespace neoxsim {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() /
                   ("neoxsim-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
                    ::testing::UnitTest::GetInstance()->current_test_info()->name());
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_in_process(const std::string& cmd, const RunConfig& cfg) {
  std::ostringstream out, err;
  const int code = run_command(cmd, cfg, out, err);
  return {code, out.str(), err.str()};
}

// Runs the CLI binary and returns its exit status; stdout goes to `out`.
int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(NEOXSIM_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------- table

Table sample_table() {
  Table t({Column::label("name"), Column::number("a", 2), Column::number("b", 0)});
  t.add_row({std::string("x,y"), 1.005, 3.0});
  t.add_row({std::string("plain"), -2.5, 1e6});
  return t;
}

TEST(Table, CsvRoundTrip) {
  const auto t = sample_table();
  EXPECT_EQ(Table::from_csv(t.to_csv()), t);
  EXPECT_EQ(t.to_csv().substr(0, t.to_csv().find('\n')), "name,a,b");
}

TEST(Table, JsonRoundTrip) {
  const auto t = sample_table();
  EXPECT_EQ(Table::from_json(t.to_json()), t);
  const auto j = nlohmann::json::parse(t.to_json());
  EXPECT_EQ(j.at("rows").size(), 2u);
}

TEST(Table, RoundsToDisplayedDecimals) {
  Table t({Column::number("v", 3)});
  t.add_row({1.23456});
  EXPECT_EQ(t.number(0, "v"), 1.235);
  EXPECT_THROW(t.add_row({std::nan("")}), std::invalid_argument);
  EXPECT_THROW(t.add_row({1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(t.column_index("missing"), std::out_of_range);
}

TEST(Table, ConsoleHasHeaderAndRows) {
  const auto s = sample_table().to_console();
  EXPECT_NE(s.find("name"), std::string::npos);
  EXPECT_NE(s.find("plain"), std::string::npos);
  EXPECT_NE(s.find("1000000"), std::string::npos);
}

// ---------------------------------------------------------------- config

TEST(RunConfig, ParsesFileWithComments) {
  const auto cfg = parse_run_config(
      "# comment\n"
      "run.seq_lens = 16, 64\n"
      "hardware.launch_overhead = 2e-6  # trailing\n"
      "model.preset = tiny\n"
      "model.n_layers = 3\n"
      "cluster.n_blocks = 2\n"
      "run.format = json\n");
  EXPECT_EQ(cfg.model.hidden, 8u);
  EXPECT_EQ(cfg.model.n_layers, 3u);
  EXPECT_EQ(cfg.seq_lens, (std::vector<std::size_t>{16, 64}));
  EXPECT_EQ(cfg.hardware.launch_overhead, 2e-6);
  EXPECT_EQ(cfg.cluster.n_blocks, 2u);
  EXPECT_EQ(cfg.format, OutputFormat::Json);
}

TEST(RunConfig, ErrorsNameOriginAndLine) {
  try {
    parse_run_config("run.seed = 1\nrun.bogus = 2\n", "my.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("my.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("unknown config key 'run.bogus'"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("run.seed\n"), ConfigError);
  RunConfig cfg;
  EXPECT_THROW(cfg.set("run.seq_lens", ""), ConfigError);
  EXPECT_THROW(cfg.set("cluster.n_blocks", "zero"), ConfigError);
  EXPECT_THROW(cfg.set("run.format", "xml"), ConfigError);
}

TEST(RunConfig, UintLists) {
  EXPECT_EQ(parse_uint_list("1,2,5-7"), (std::vector<std::uint64_t>{1, 2, 5, 6, 7}));
  EXPECT_THROW(parse_uint_list("3-1"), std::invalid_argument);
  try {
    parse_uint_list("4,a");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos) << e.what();
  }
  RunConfig cfg;
  EXPECT_EQ(cfg.seeds.size(), 100u);
}

// ---------------------------------------------------------------- commands

TEST(Commands, VerifyPassesByDefault) {
  RunConfig cfg;
  cfg.suites = {"split", "rope", "reduction"};
  const auto r = run_in_process("verify", cfg);
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("pass"), std::string::npos);
}

TEST(Commands, VerifyFaultIsDetected) {
  for (const auto& suite : verify_suite_names()) {
    RunConfig cfg;
    cfg.suites = {suite};
    cfg.fault = suite;
    const auto r = run_in_process("verify", cfg);
    EXPECT_EQ(r.code, kExitVerifyFailed) << suite;
    EXPECT_NE(r.err.find("suite " + suite + " failed"), std::string::npos) << r.err;
  }
}

TEST(Commands, VerifyUsageErrors) {
  RunConfig cfg;
  cfg.suites = {};
  EXPECT_EQ(run_in_process("verify", cfg).code, kExitUsage);
  cfg.suites = {"nope"};
  EXPECT_EQ(run_in_process("verify", cfg).code, kExitUsage);
  cfg.suites = {"rope"};
  cfg.fault = "nope";
  EXPECT_EQ(run_in_process("verify", cfg).code, kExitUsage);
}

TEST(Commands, CalibrateNeedsMeasurements) {
  RunConfig cfg;
  const auto r = run_in_process("calibrate", cfg);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("measurements"), std::string::npos);
}

TEST(Commands, CalibrateReportsMalformedRow) {
  const auto dir = temp_dir();
  std::ofstream(dir / "bad.csv") << "seq_len,tpot_ms,variant\n16,5.69,hf\n32,oops,hf\n";
  RunConfig cfg;
  cfg.measurements = dir / "bad.csv";
  const auto r = run_in_process("calibrate", cfg);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("tpot_ms"), std::string::npos) << r.err;
  cfg.measurements = dir / "missing.csv";
  const auto m = run_in_process("calibrate", cfg);
  EXPECT_EQ(m.code, kExitUsage);
  EXPECT_NE(m.err.find("missing.csv"), std::string::npos) << m.err;
}

TEST(Commands, CalibrateShippedData) {
  RunConfig cfg;
  cfg.measurements = fs::path(NEOXSIM_DATA_DIR) / "pythia-2.8b-rtx5090.csv";
  HardwareModel hw;
  const auto t = cmd_calibrate(cfg, &hw);
  EXPECT_EQ(t.rows().size(), 40u);
  EXPECT_EQ(hw, shipped_hardware());
}

TEST(Commands, CostWithoutOverheadsFollowsBytes) {
  RunConfig cfg;
  for (const char* key : {"hardware.launch_overhead", "hardware.descriptor_cost",
                          "hardware.graph_replay_overhead"}) {
    cfg.set(key, "0");
  }
  for (const char* c : {"library_gemm", "library_attention", "fused_cluster", "mlp_down_standalone"}) {
    cfg.set(std::string("hardware.efficiency.") + c, "1");
  }
  const auto t = cmd_cost(cfg);
  ASSERT_EQ(t.rows().size(), cfg.seq_lens.size());
  for (std::size_t i = 0; i < cfg.seq_lens.size(); ++i) {
    const auto n = cfg.seq_lens[i];
    const double ratio = traffic(FusionPlan::baseline(), cfg.model, n).total() /
                         traffic(FusionPlan::fused(false), cfg.model, n).total();
    EXPECT_NEAR(t.number(i, "cf_speedup"), ratio, 0.006);
    EXPECT_EQ(t.number(i, "graph_speedup"), t.number(i, "cf_speedup"));
  }
}

TEST(Commands, AblateNotesUnits) {
  RunConfig cfg;
  std::vector<std::string> notes;
  const auto t = cmd_ablate(cfg, &notes);
  EXPECT_EQ(t.rows().size(), 4u);
  std::string all;
  for (const auto& n : notes) all += n + "\n";
  EXPECT_NE(all.find("1310720"), std::string::npos) << all;
  EXPECT_NE(all.find("1000"), std::string::npos) << all;
}

TEST(Commands, FlopsTableShape) {
  RunConfig cfg;
  const auto t = cmd_flops(cfg);
  ASSERT_EQ(t.rows().size(), 8u);
  EXPECT_NEAR(t.number(0, "prefill_gflops"), 26.48, 0.03 * 26.48);
  EXPECT_NEAR(t.number(7, "decode_gflops"), 11544.32, 0.03 * 11544.32);
}

TEST(Commands, FidelityAdversarial) {
  RunConfig cfg;
  cfg.set("run.instance", "adversarial");
  cfg.set("run.seeds", "0-99");
  cfg.set("cluster.precision", "fp16");
  const auto t = cmd_fidelity(cfg);
  const auto row = t.column_index("metric");
  bool found = false;
  for (std::size_t i = 0; i < t.rows().size(); ++i) {
    if (std::get<std::string>(t.rows()[i][row]) == "distinct_outputs") {
      EXPECT_GE(t.number(i, "max"), 2.0);
      found = true;
    }
  }
  EXPECT_TRUE(found);
  cfg.set("cluster.precision", "exact");
  const auto e = cmd_fidelity(cfg);
  EXPECT_EQ(e.number(e.rows().size() - 1, "max"), 1.0);
}

TEST(Commands, TraceIsJsonLines) {
  RunConfig cfg;
  cfg.set("model.preset", "tiny");
  cfg.set("run.steps", "3");
  std::istringstream lines(cmd_trace(cfg));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("bytes_offchip"));
    ++n;
  }
  EXPECT_EQ(n, 3u);
}

// ---------------------------------------------------------------- golden

RunConfig fixture_config() {
  RunConfig cfg;
  cfg.set("model.preset", "tiny");
  cfg.set("run.seed", "7");
  cfg.set("run.steps", "6");
  return cfg;
}

TEST(Golden, InProcessMatchesRecordedFixture) {
  std::string notice;
  const auto text = cmd_golden(fixture_config(), &notice);
  EXPECT_EQ(text, read_file(fs::path(NEOXSIM_FIXTURE_DIR) / "tiny_golden.json"));
  EXPECT_NE(notice.find("synthesizing"), std::string::npos);
}

TEST(Golden, MissingBlobFallsBack) {
  const auto dir = temp_dir();
  auto cfg = fixture_config();
  cfg.weights = dir / "absent.json";
  const auto r = run_in_process("golden", cfg);
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.err.find("not found"), std::string::npos) << r.err;
}

TEST(Golden, UnwritableOutputReportsPath) {
  auto cfg = fixture_config();
  cfg.out = "/nonexistent-dir/x/golden.json";
  const auto r = run_in_process("golden", cfg);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("/nonexistent-dir/x/golden.json"), std::string::npos) << r.err;
}

// ---------------------------------------------------------------- binary

TEST(Binary, GoldenIsByteIdenticalAcrossRuns) {
  const auto dir = temp_dir();
  const std::string args = "golden --preset tiny --seed 7 --set run.steps=6 --out ";
  ASSERT_EQ(run_cli(args + (dir / "a.json").string(), dir / "stdout"), 0);
  ASSERT_EQ(run_cli(args + (dir / "b.json").string(), dir / "stdout"), 0);
  EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
  EXPECT_EQ(read_file(dir / "a.json"), read_file(fs::path(NEOXSIM_FIXTURE_DIR) / "tiny_golden.json"));
}

TEST(Binary, TablesAreDeterministic) {
  const auto dir = temp_dir();
  for (const char* cmd : {"cost", "flops", "ablate --format json"}) {
    ASSERT_EQ(run_cli(cmd, dir / "a"), 0) << cmd;
    ASSERT_EQ(run_cli(cmd, dir / "b"), 0) << cmd;
    EXPECT_EQ(read_file(dir / "a"), read_file(dir / "b")) << cmd;
    EXPECT_FALSE(read_file(dir / "a").empty()) << cmd;
  }
}

TEST(Binary, UsageErrorsExitTwo) {
  const auto dir = temp_dir();
  EXPECT_EQ(run_cli("", dir / "o"), 2);
  EXPECT_EQ(run_cli("cost --set bogus.key=1", dir / "o"), 2);
  EXPECT_EQ(run_cli("cost --format xml", dir / "o"), 2);
  EXPECT_EQ(run_cli("calibrate", dir / "o"), 2);
  EXPECT_EQ(run_cli("verify --suites rope --fault rope", dir / "o"), 1);
}

TEST(Binary, ConfigFileAndOverrides) {
  const auto dir = temp_dir();
  std::ofstream(dir / "run.cfg") << "model.preset = pythia-2.8b\nrun.seq_lens = 16\n";
  ASSERT_EQ(run_cli("flops --config " + (dir / "run.cfg").string() + " --format json", dir / "o"), 0);
  const auto j = nlohmann::json::parse(read_file(dir / "o"));
  EXPECT_EQ(j.at("rows").size(), 1u);
  ASSERT_EQ(run_cli("flops --config " + (dir / "run.cfg").string() + " --seq-lens 16,32,64", dir / "o"), 0);
  const auto t = Table::from_csv(read_file(dir / "o"));
  EXPECT_EQ(t.rows().size(), 3u);
}

}  // namespace
}  // namespace neoxsim
