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

#ifndef AISRL_EXPERIMENT_HPP
#define AISRL_EXPERIMENT_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aisrl/trainer.hpp"

/**
 * \file
 * \brief Run directories and correction-mode sweeps.
 *
 * A run directory holds manifest.json, metrics.jsonl, summary.json and
 * checkpoint.bin. The manifest is written before the first step and
 * rewritten with the end timestamp when the run finishes.
 */

namespace aisrl {

inline constexpr int kSummaryWindow = 200;

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path manifest;
  std::filesystem::path metrics;
  std::filesystem::path summary;
  std::filesystem::path checkpoint;

  static RunPaths in(const std::filesystem::path& dir);
};

struct RunSummary {
  std::string status = "ok";
  int steps_completed = 0;
  /// Steps in the terminal averaging window.
  int window = 0;
  double initial_reward = 0.0;
  double final_window_reward = 0.0;
  double mean_alpha = 0.0;
  double final_window_alpha = 0.0;
  double final_window_cv_w = 0.0;
  double final_window_ess_ratio = 0.0;
  double final_window_kl_rollout_train = 0.0;
  double final_window_d_bar = 0.0;
  double final_window_mean_abs_dp = 0.0;
  std::optional<std::string> checkpoint;
  std::optional<std::string> error;
  std::optional<int> error_step;
};

/// Window and whole-run averages over a metrics stream.
RunSummary summarize(const std::vector<StepMetrics>& metrics, int window = kSummaryWindow);

nlohmann::json summary_to_json(const RunSummary& summary);

struct RunResult {
  RunSummary summary;
  std::vector<StepMetrics> metrics;
};

/// Trains under `cfg` and writes a complete run directory. A non-finite
/// abort is recorded in the summary (status "aborted") rather than thrown;
/// the metrics stream then holds every completed step.
RunResult run_experiment(const TrainConfig& cfg, const std::filesystem::path& out_dir);

struct Variant {
  /// Display label: None, TIS(C=2), AIS.
  std::string label;
  /// Directory name: none, tis_c2, ais.
  std::string slug;
  CorrectionMode mode = CorrectionMode::kAis;
  /// Truncation threshold for TIS variants; AIS uses the base config's.
  std::optional<double> c;
};

/// Parses a comma-separated list such as "none,tis:2,tis:5,ais".
std::vector<Variant> parse_variants(std::string_view spec);

/// The base config with the variant's correction mode and threshold applied.
TrainConfig variant_config(const TrainConfig& base, const Variant& variant);

struct SweepResult {
  std::vector<Variant> variants;
  std::vector<RunResult> runs;
  std::filesystem::path comparison_csv;
};

inline constexpr std::string_view kComparisonHeader =
    "step,variant,reward,alpha,cv_w,ess_ratio,d_bar,kl_rollout_train,mean_abs_dp";

/// One run per variant under `out_dir/<slug>`, sharing seed and task, plus
/// `out_dir/comparison.csv`. Variants run concurrently on up to
/// `parallel_runs` threads; each run is still single-owner and deterministic.
SweepResult run_sweep(const TrainConfig& base, const std::vector<Variant>& variants,
                      const std::filesystem::path& out_dir, int parallel_runs = 1);

/// Writes the comparison CSV, rows ordered by step and then by variant.
void write_comparison_csv(const std::filesystem::path& path, const std::vector<Variant>& variants,
                          const std::vector<RunResult>& runs);

}  // namespace aisrl

#endif  // AISRL_EXPERIMENT_HPP
