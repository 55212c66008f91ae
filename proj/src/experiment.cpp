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

#include "aisrl/experiment.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <stdexcept>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "aisrl/checkpoint.hpp"
#include "aisrl/config.hpp"
#include "parallel.hpp"

namespace aisrl {

namespace {

using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}Z", now);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  }
  out << text;
  if (!out) {
    throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
  }
}

json manifest_json(const TrainConfig& cfg, const RunPaths& paths, const std::string& started,
                   const std::optional<std::string>& ended) {
  json j;
  j["config"] = config_to_json(cfg);
  j["seed"] = cfg.seed;
  j["version"] = AISRL_VERSION;
  j["started_at"] = started;
  j["ended_at"] = ended ? json(*ended) : json(nullptr);
  j["outputs"] = {
      {"metrics", paths.metrics.filename().string()},
      {"summary", paths.summary.filename().string()},
      {"checkpoint", paths.checkpoint.filename().string()},
  };
  return j;
}

template <class Field>
double window_mean(const std::vector<StepMetrics>& metrics, std::size_t first, Field field) {
  if (first >= metrics.size()) {
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t i = first; i < metrics.size(); ++i) {
    total += metrics[i].*field;
  }
  return total / static_cast<double>(metrics.size() - first);
}

}  // namespace

RunPaths RunPaths::in(const std::filesystem::path& dir) {
  return {dir, dir / "manifest.json", dir / "metrics.jsonl", dir / "summary.json", dir / "checkpoint.bin"};
}

RunSummary summarize(const std::vector<StepMetrics>& metrics, int window) {
  RunSummary s;
  s.steps_completed = static_cast<int>(metrics.size());
  if (metrics.empty()) {
    return s;
  }
  s.window = std::min(std::max(window, 1), s.steps_completed);
  const std::size_t first = metrics.size() - static_cast<std::size_t>(s.window);
  s.initial_reward = metrics.front().mean_reward;
  s.mean_alpha = window_mean(metrics, 0, &StepMetrics::alpha);
  s.final_window_reward = window_mean(metrics, first, &StepMetrics::mean_reward);
  s.final_window_alpha = window_mean(metrics, first, &StepMetrics::alpha);
  s.final_window_cv_w = window_mean(metrics, first, &StepMetrics::cv_w);
  s.final_window_ess_ratio = window_mean(metrics, first, &StepMetrics::ess_ratio);
  s.final_window_kl_rollout_train = window_mean(metrics, first, &StepMetrics::kl_rollout_train);
  s.final_window_d_bar = window_mean(metrics, first, &StepMetrics::d_bar);
  s.final_window_mean_abs_dp = window_mean(metrics, first, &StepMetrics::mean_abs_dp);
  return s;
}

json summary_to_json(const RunSummary& s) {
  json j;
  j["status"] = s.status;
  j["steps_completed"] = s.steps_completed;
  j["window"] = s.window;
  j["initial_reward"] = s.initial_reward;
  j["final_window_reward"] = s.final_window_reward;
  j["mean_alpha"] = s.mean_alpha;
  j["final_window_alpha"] = s.final_window_alpha;
  j["final_window_cv_w"] = s.final_window_cv_w;
  j["final_window_ess_ratio"] = s.final_window_ess_ratio;
  j["final_window_kl_rollout_train"] = s.final_window_kl_rollout_train;
  j["final_window_d_bar"] = s.final_window_d_bar;
  j["final_window_mean_abs_dp"] = s.final_window_mean_abs_dp;
  j["checkpoint"] = s.checkpoint ? json(*s.checkpoint) : json(nullptr);
  if (s.error) {
    j["error"] = {{"message", *s.error}, {"step", s.error_step ? json(*s.error_step) : json(nullptr)}};
  }
  return j;
}

RunResult run_experiment(const TrainConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const RunPaths paths = RunPaths::in(out_dir);
  const std::string started = utc_timestamp();
  write_text(paths.manifest, manifest_json(cfg, paths, started, std::nullopt).dump(2) + "\n");

  std::ofstream metrics_out(paths.metrics, std::ios::binary | std::ios::trunc);
  if (!metrics_out) {
    throw std::runtime_error(fmt::format("cannot write '{}'", paths.metrics.string()));
  }

  RunResult result;
  result.metrics.reserve(static_cast<std::size_t>(cfg.total_steps));
  Trainer trainer{cfg};
  std::optional<NonFiniteError> failure;
  for (int s = 0; s < cfg.total_steps; ++s) {
    try {
      result.metrics.push_back(trainer.step());
    } catch (const NonFiniteError& e) {
      failure = e;
      break;
    }
    metrics_out << metrics_line(result.metrics.back()) << '\n';
  }
  metrics_out.flush();
  if (!metrics_out) {
    throw std::runtime_error(fmt::format("write to '{}' failed", paths.metrics.string()));
  }

  result.summary = summarize(result.metrics);
  if (failure) {
    result.summary.status = "aborted";
    result.summary.error = failure->what();
    result.summary.error_step = failure->step();
  } else {
    save_checkpoint(paths.checkpoint, trainer.params());
    result.summary.checkpoint = paths.checkpoint.string();
  }
  write_text(paths.summary, summary_to_json(result.summary).dump(2) + "\n");
  write_text(paths.manifest, manifest_json(cfg, paths, started, utc_timestamp()).dump(2) + "\n");
  return result;
}

std::vector<Variant> parse_variants(std::string_view spec) {
  std::vector<Variant> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    std::string_view item = spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!item.empty() && item.front() == ' ') {
      item.remove_prefix(1);
    }
    while (!item.empty() && item.back() == ' ') {
      item.remove_suffix(1);
    }
    if (item.empty()) {
      throw std::invalid_argument(fmt::format("empty entry in variant list '{}'", spec));
    }
    Variant v;
    if (item == "none") {
      v = {"None", "none", CorrectionMode::kNone, std::nullopt};
    } else if (item == "ais") {
      v = {"AIS", "ais", CorrectionMode::kAis, std::nullopt};
    } else if (item.substr(0, 4) == "tis:") {
      const std::string number(item.substr(4));
      std::size_t used = 0;
      double c = 0.0;
      try {
        c = std::stod(number, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != number.size() || !(c >= 1.0) || !std::isfinite(c)) {
        throw std::invalid_argument(fmt::format("TIS threshold in '{}' must be a number >= 1", item));
      }
      v = {fmt::format("TIS(C={})", c), fmt::format("tis_c{}", c), CorrectionMode::kTis, c};
    } else {
      throw std::invalid_argument(fmt::format("unknown variant '{}' (expected none, tis:<C> or ais)", item));
    }
    for (const auto& existing : out) {
      if (existing.slug == v.slug) {
        throw std::invalid_argument(fmt::format("duplicate variant '{}'", item));
      }
    }
    out.push_back(std::move(v));
    if (comma == std::string_view::npos) {
      break;
    }
    pos = comma + 1;
  }
  return out;
}

TrainConfig variant_config(const TrainConfig& base, const Variant& variant) {
  TrainConfig cfg = base;
  cfg.correction = variant.mode;
  if (variant.c) {
    cfg.ais.c = *variant.c;
  }
  return cfg;
}

void write_comparison_csv(const std::filesystem::path& path, const std::vector<Variant>& variants,
                          const std::vector<RunResult>& runs) {
  if (variants.size() != runs.size()) {
    throw std::invalid_argument("one run per variant required");
  }
  std::string text(kComparisonHeader);
  text += '\n';
  std::size_t longest = 0;
  for (const auto& run : runs) {
    longest = std::max(longest, run.metrics.size());
  }
  for (std::size_t step = 0; step < longest; ++step) {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (step >= runs[v].metrics.size()) {
        continue;
      }
      const StepMetrics& m = runs[v].metrics[step];
      text += fmt::format("{},{},{},{},{},{},{},{},{}\n", m.step, variants[v].label, m.mean_reward, m.alpha, m.cv_w,
                          m.ess_ratio, m.d_bar, m.kl_rollout_train, m.mean_abs_dp);
    }
  }
  write_text(path, text);
}

SweepResult run_sweep(const TrainConfig& base, const std::vector<Variant>& variants,
                      const std::filesystem::path& out_dir, int parallel_runs) {
  if (variants.empty()) {
    throw std::invalid_argument("sweep needs at least one variant");
  }
  std::vector<TrainConfig> configs;
  configs.reserve(variants.size());
  for (const auto& v : variants) {
    configs.push_back(variant_config(base, v));
    configs.back().validate();
  }
  std::filesystem::create_directories(out_dir);

  SweepResult result;
  result.variants = variants;
  result.runs.resize(variants.size());
  detail::parallel_for(variants.size(), parallel_runs, [&](std::size_t i) {
    result.runs[i] = run_experiment(configs[i], out_dir / variants[i].slug);
  });
  result.comparison_csv = out_dir / "comparison.csv";
  write_comparison_csv(result.comparison_csv, variants, result.runs);
  return result;
}

}  // namespace aisrl
