// Copyright 2026 The aisrl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const auto log = fs::temp_directory_path() / ("aisrl_cli_output_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd = std::string(AISRL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  fs::remove(log);
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    ++n;
  }
  return n;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aisrl_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kMinimal = std::string(AISRL_CONFIG_DIR) + "/minimal.json";

TEST(Cli, MissingConfigNamesPath) {
  const auto r = run_cli("train --config /nonexistent/cfg.json --out " + fresh_dir("missing").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("/nonexistent/cfg.json"), std::string::npos);
}

TEST(Cli, TrainWritesOneLinePerStep) {
  const auto dir = fresh_dir("train");
  const auto r = run_cli("train --config " + kMinimal + " --out " + dir.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(count_lines(dir / "metrics.jsonl"), 2U);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint.bin"));
}

TEST(Cli, RerunsAreByteIdentical) {
  const auto a = fresh_dir("rerun_a");
  const auto b = fresh_dir("rerun_b");
  ASSERT_EQ(run_cli("train --config " + kMinimal + " --out " + a.string() + " --trainer.total_steps=5").exit_code, 0);
  ASSERT_EQ(run_cli("train --config " + kMinimal + " --out " + b.string() + " --trainer.total_steps=5").exit_code, 0);
  EXPECT_EQ(read_file(a / "metrics.jsonl"), read_file(b / "metrics.jsonl"));
  EXPECT_EQ(count_lines(a / "metrics.jsonl"), 5U);
}

TEST(Cli, BadOverridesAreUsageErrors) {
  const auto dir = fresh_dir("bad_override");
  EXPECT_EQ(run_cli("train --config " + kMinimal + " --out " + dir.string() + " --trainer.bogus=1").exit_code, 2);
  EXPECT_EQ(run_cli("train --config " + kMinimal + " --out " + dir.string() + " --ais.c=0.1").exit_code, 2);
  EXPECT_EQ(run_cli("train --config " + kMinimal + " --out " + dir.string() + " --quant.kind=fp4").exit_code, 2);
}

TEST(Cli, SweepWritesComparison) {
  const auto dir = fresh_dir("sweep");
  const auto r = run_cli("sweep --config " + kMinimal + " --out " + dir.string() +
                         " --variants tis:2,ais --trainer.total_steps=5");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(count_lines(dir / "comparison.csv"), 1U + 2U * 5U);
}

TEST(Cli, SweepRejectsUnknownVariant) {
  EXPECT_EQ(run_cli("sweep --config " + kMinimal + " --out " + fresh_dir("bad_variant").string() +
                    " --variants none,ppo")
                .exit_code,
            2);
}

TEST(Cli, OracleEmptySuitePasses) {
  EXPECT_EQ(run_cli("oracle --suite-size 0").exit_code, 0);
}

TEST(Cli, OracleWritesReport) {
  const auto report = fresh_dir("oracle") / "report.json";
  fs::create_directories(report.parent_path());
  const auto r = run_cli("oracle --suite-size 5 --report " + report.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto text = read_file(report);
  EXPECT_NE(text.find("\"passed\": true"), std::string::npos);
  EXPECT_NE(text.find("max_b1_over_b0"), std::string::npos);
}

TEST(Cli, OracleMisreportFails) {
  const auto r = run_cli("oracle --suite-size 3 --misreport-c-scale 0");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("first failing instance seed"), std::string::npos);
}

TEST(Cli, QuantbenchPasses) {
  EXPECT_EQ(run_cli("quantbench --spec e4m3 --tensors 2000").exit_code, 0);
  EXPECT_EQ(run_cli("quantbench --spec intb --bits 8 --tensors 2000").exit_code, 0);
  EXPECT_EQ(run_cli("quantbench --spec full --tensors 200").exit_code, 0);
  EXPECT_EQ(run_cli("quantbench --spec fp4").exit_code, 2);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run_cli("launch").exit_code, 2);
}

}  // namespace
