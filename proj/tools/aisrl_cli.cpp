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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "aisrl/config.hpp"
#include "aisrl/experiment.hpp"
#include "aisrl/quantbench.hpp"
#include "aisrl/theory.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsageError = 2,
  kNonFinite = 3,
};

aisrl::TrainConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc = aisrl::read_config_document(path);
  for (const auto& flag : overrides) {
    aisrl::apply_override_flag(doc, flag);
  }
  return aisrl::config_from_json(doc);
}

void write_report(const std::string& path, const std::string& text) {
  if (path.empty()) {
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write '{}'", path));
  }
  out << text << '\n';
}

int report_run(const aisrl::RunResult& run, const std::string& dir) {
  const auto& s = run.summary;
  if (s.status != "ok") {
    fmt::print(stderr, "error: run in '{}' aborted at step {}: {}\n", dir, s.error_step.value_or(-1),
               s.error.value_or("unknown"));
    return kNonFinite;
  }
  fmt::print("{}: {} steps, final-window reward {}, mean alpha {}\n", dir, s.steps_completed, s.final_window_reward,
             s.mean_alpha);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive importance sampling for GRPO under quantized rollouts"};
  app.set_version_flag("--version", AISRL_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "Train one configuration and write a run directory");
  train->add_option("--config", config_path, "Config document (JSON)")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->allow_extras();
  train->footer("Any config key can be overridden as --section.key=value, e.g. --quant.kind=e4m3 --ais.c=5");

  std::string variants_spec = "none,tis:2,tis:5,tis:10,ais";
  int parallel_runs = 1;
  auto* sweep = app.add_subcommand("sweep", "Train one run per correction variant and compare");
  sweep->add_option("--config", config_path, "Config document (JSON)")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--variants", variants_spec, "Comma-separated list of none, tis:<C>, ais")->capture_default_str();
  sweep->add_option("--parallel-runs", parallel_runs, "Variants trained concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->allow_extras();

  aisrl::theory::SuiteOptions suite;
  std::string report_path;
  auto* oracle = app.add_subcommand("oracle", "Verify the estimator theory on enumerable instances");
  oracle->add_option("--suite-size", suite.num_instances, "Random instances per check")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  oracle->add_option("--seed", suite.seed, "Root seed")->capture_default_str();
  oracle->add_option("--grid-points", suite.grid_points, "Points in the alpha grid")
      ->check(CLI::Range(2, 10000001))
      ->capture_default_str();
  oracle->add_option("--report", report_path, "Write the JSON report to this path");
  oracle->add_option("--misreport-c-scale", suite.bound_c_scale, "Scale applied to C in the bound check")
      ->group("");

  aisrl::QuantBenchOptions bench;
  std::string spec_name = "e4m3";
  auto* quantbench = app.add_subcommand("quantbench", "Property-check a quantizer on random tensors");
  quantbench->add_option("--spec", spec_name, "full, intb or e4m3")->capture_default_str();
  quantbench->add_option("--bits", bench.spec.bits, "Bit width for intb")->capture_default_str();
  quantbench->add_option("--tensors", bench.num_tensors, "Number of random tensors")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  quantbench->add_option("--seed", bench.seed, "Root seed")->capture_default_str();
  quantbench->add_option("--report", report_path, "Write the JSON report to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (train->parsed()) {
      const auto cfg = resolve_config(config_path, train->remaining());
      return report_run(aisrl::run_experiment(cfg, out_dir), out_dir);
    }
    if (sweep->parsed()) {
      const auto cfg = resolve_config(config_path, sweep->remaining());
      const auto variants = aisrl::parse_variants(variants_spec);
      const auto result = aisrl::run_sweep(cfg, variants, out_dir, parallel_runs);
      int code = kOk;
      for (std::size_t i = 0; i < variants.size(); ++i) {
        code = std::max(code, report_run(result.runs[i], (std::filesystem::path(out_dir) / variants[i].slug).string()));
      }
      fmt::print("comparison: {}\n", result.comparison_csv.string());
      return code;
    }
    if (oracle->parsed()) {
      const auto report = aisrl::theory::run_suite(suite);
      const std::string text = aisrl::theory::report_to_json(report, suite);
      fmt::print("{}\n", text);
      write_report(report_path, text);
      if (!report.passed()) {
        const aisrl::theory::CheckSummary* checks[] = {&report.oracle_grid,   &report.oracle_minimum,
                                                       &report.simplified_oracle, &report.second_moment,
                                                       &report.on_policy_recovery, &report.is_unbiased};
        for (const auto* c : checks) {
          if (c->first_failing_seed) {
            fmt::print(stderr, "error: check failed; first failing instance seed {}\n", *c->first_failing_seed);
            break;
          }
        }
        return kCheckFailed;
      }
      return kOk;
    }
    if (quantbench->parsed()) {
      const int bits = bench.spec.bits;
      switch (aisrl::parse_quant_kind(spec_name)) {
        case aisrl::QuantKind::kFull:
          bench.spec = aisrl::QuantSpec::full();
          break;
        case aisrl::QuantKind::kIntB:
          bench.spec = aisrl::QuantSpec::int_b(bits);
          break;
        case aisrl::QuantKind::kE4M3:
          bench.spec = aisrl::QuantSpec::e4m3();
          break;
      }
      const auto report = aisrl::run_quantbench(bench);
      const std::string text = aisrl::quantbench_to_json(report, bench);
      fmt::print("{}\n", text);
      write_report(report_path, text);
      if (!report.passed()) {
        fmt::print(stderr, "error: quantizer property violated; first failing tensor {}\n",
                   report.first_failing_tensor.value_or(-1));
        return kCheckFailed;
      }
      return kOk;
    }
  } catch (const aisrl::ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsageError;
  } catch (const aisrl::NonFiniteError& e) {
    fmt::print(stderr, "error: non-finite value at step {}: {}\n", e.step(), e.what());
    return kNonFinite;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kCheckFailed;
  }
  return kOk;
}
