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

#include "aisrl/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace aisrl {

void Trajectory::validate() const {
  if (logp_rollout.size() != completion.size() || logp_train.size() != completion.size()) {
    throw std::invalid_argument(fmt::format("trajectory tracks have lengths {}/{} for {} tokens",
                                            logp_rollout.size(), logp_train.size(), completion.size()));
  }
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(logp_rollout.begin(), logp_rollout.end(), finite) ||
      !std::all_of(logp_train.begin(), logp_train.end(), finite)) {
    throw std::invalid_argument("trajectory log-probabilities must be finite");
  }
}

std::size_t GroupBatch::num_tokens() const noexcept {
  std::size_t n = 0;
  for (const auto& group : groups) {
    for (const auto& traj : group.members) {
      n += traj.length();
    }
  }
  return n;
}

std::size_t GroupBatch::num_trajectories() const noexcept {
  std::size_t n = 0;
  for (const auto& group : groups) {
    n += group.members.size();
  }
  return n;
}

void GroupBatch::validate() const {
  if (groups.empty()) {
    throw std::invalid_argument("batch has no groups");
  }
  const std::size_t g = groups.front().members.size();
  if (g < 2) {
    throw std::invalid_argument(fmt::format("group size must be >= 2, got {}", g));
  }
  for (const auto& group : groups) {
    if (group.members.size() != g) {
      throw std::invalid_argument(
          fmt::format("every group must have {} members, found one with {}", g, group.members.size()));
    }
    for (const auto& traj : group.members) {
      traj.validate();
    }
  }
}

void AisConfig::validate() const {
  if (!(c >= 1.0)) {
    throw std::invalid_argument(fmt::format("ais.c must be >= 1, got {}", c));
  }
  if (!(delta > 0.0)) {
    throw std::invalid_argument(fmt::format("ais.delta must be > 0, got {}", delta));
  }
  if (!(gamma > 0.0)) {
    throw std::invalid_argument(fmt::format("ais.gamma must be > 0, got {}", gamma));
  }
  if (!(beta_var >= 0.0)) {
    throw std::invalid_argument(fmt::format("ais.beta_var must be >= 0, got {}", beta_var));
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument(fmt::format("ais.eps must be > 0, got {}", eps));
  }
}

double sample_std(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) {
    return 0.0;
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (const double v : x) {
    ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double token_ratio(const Trajectory& traj, std::size_t t) {
  return std::exp(traj.logp_train.at(t) - traj.logp_rollout.at(t));
}

double truncate(double ratio, double c) { return std::min(ratio, c); }

std::vector<double> group_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw std::invalid_argument(fmt::format("group advantage needs at least 2 rewards, got {}", rewards.size()));
  }
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size());
  std::transform(rewards.begin(), rewards.end(), out.begin(), [mean](double r) { return r - mean; });
  return out;
}

EssStats alpha_ess(std::span<const double> truncated_weights) {
  if (truncated_weights.empty()) {
    throw std::invalid_argument("alpha_ess needs at least one weight");
  }
  const double mean = std::accumulate(truncated_weights.begin(), truncated_weights.end(), 0.0) /
                      static_cast<double>(truncated_weights.size());
  EssStats stats;
  stats.cv = sample_std(truncated_weights) / mean;
  stats.ess_ratio = 1.0 / (1.0 + stats.cv * stats.cv);
  stats.alpha_ess = std::sqrt(stats.ess_ratio);
  return stats;
}

double mean_abs_discrepancy(const GroupBatch& batch) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      for (std::size_t t = 0; t < traj.length(); ++t) {
        total += std::abs(traj.logp_train[t] - traj.logp_rollout[t]);
        ++n;
      }
    }
  }
  if (n == 0) {
    throw std::invalid_argument("mean_abs_discrepancy on a batch without token positions");
  }
  return total / static_cast<double>(n);
}

double alpha_mis(double d_bar, double delta) { return std::min(1.0, d_bar / delta); }

double variance_amplification(std::span<const double> advantages, std::span<const double> truncated_weights,
                              double eps) {
  if (advantages.size() != truncated_weights.size()) {
    throw std::invalid_argument(fmt::format("variance_amplification: {} advantages vs {} weights",
                                            advantages.size(), truncated_weights.size()));
  }
  std::vector<double> weighted(advantages.size());
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    weighted[i] = advantages[i] * truncated_weights[i];
  }
  return sample_std(weighted) / (sample_std(advantages) + eps);
}

double alpha_var(double delta_sigma, double gamma) { return std::max(0.0, (delta_sigma - gamma) / gamma); }

double bilateral_alpha(double alpha_ess, double alpha_var, double alpha_mis, double beta_var) {
  return std::clamp(alpha_ess - beta_var * alpha_var, 0.0, 1.0) * alpha_mis;
}

double bilateral_alpha(const AlphaSignals& signals, double beta_var) {
  return bilateral_alpha(signals.alpha_ess, signals.alpha_var, signals.alpha_mis, beta_var);
}

double rectification_weight(double w_bar, double alpha) { return 1.0 + alpha * (w_bar - 1.0); }

double adjusted_advantage(double advantage, double w_bar, double alpha) {
  return rectification_weight(w_bar, alpha) * advantage;
}

TokenPopulation pooled_tokens(const GroupBatch& batch, double c) {
  TokenPopulation pop;
  pop.truncated_weights.reserve(batch.num_tokens());
  pop.advantages.reserve(batch.num_tokens());
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      for (std::size_t t = 0; t < traj.length(); ++t) {
        pop.truncated_weights.push_back(truncate(token_ratio(traj, t), c));
        pop.advantages.push_back(traj.advantage);
      }
    }
  }
  return pop;
}

AlphaSignals compute_signals(const GroupBatch& batch, const AisConfig& cfg) {
  const TokenPopulation pop = pooled_tokens(batch, cfg.c);
  AlphaSignals s;
  const EssStats ess = alpha_ess(pop.truncated_weights);
  s.ess_ratio = ess.ess_ratio;
  s.cv_w = ess.cv;
  s.alpha_ess = ess.alpha_ess;
  s.d_bar = mean_abs_discrepancy(batch);
  s.alpha_mis = alpha_mis(s.d_bar, cfg.delta);
  s.delta_sigma = variance_amplification(pop.advantages, pop.truncated_weights, cfg.eps);
  s.alpha_var = alpha_var(s.delta_sigma, cfg.gamma);
  s.alpha = bilateral_alpha(s, cfg.beta_var);
  return s;
}

}  // namespace aisrl
