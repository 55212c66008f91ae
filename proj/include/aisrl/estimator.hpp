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

#ifndef AISRL_ESTIMATOR_HPP
#define AISRL_ESTIMATOR_HPP

#include <cstddef>
#include <span>
#include <vector>

/**
 * \file
 * \brief Adaptive importance sampling: ratios, truncation, the three batch
 * signals, the bilateral mixing coefficient and the adjusted advantage.
 *
 * Everything here is computed from detached values; nothing in this header
 * participates in the policy-gradient computation.
 */

namespace aisrl {

/// One sampled completion and its two log-probability tracks, both taken at
/// the same checkpoint (quantized rollout copy and full-precision trainer).
struct Trajectory {
  std::vector<int> prompt;
  std::vector<int> completion;
  std::vector<double> logp_rollout;
  std::vector<double> logp_train;
  double reward = 0.0;
  /// Group-relative advantage, shared by every token of the completion.
  double advantage = 0.0;

  [[nodiscard]] std::size_t length() const noexcept { return completion.size(); }
  /// Throws std::invalid_argument when track lengths disagree or values are non-finite.
  void validate() const;
};

struct Group {
  std::vector<Trajectory> members;
  int truth = 0;
};

/// Prompt groups of G responses each.
struct GroupBatch {
  std::vector<Group> groups;

  [[nodiscard]] std::size_t num_tokens() const noexcept;
  [[nodiscard]] std::size_t num_trajectories() const noexcept;
  /// Every group has the same size G >= 2 and every trajectory is valid.
  void validate() const;
};

struct AisConfig {
  /// Truncation threshold C >= 1.
  double c = 5.0;
  /// Saturation threshold for the divergence gate.
  double delta = 0.02;
  /// Variance tolerance.
  double gamma = 1.2;
  /// Sensitivity of the variance penalty.
  double beta_var = 1.0;
  /// Stabilizer in the variance-amplification denominator.
  double eps = 1e-6;

  void validate() const;
};

struct EssStats {
  double ess_ratio = 1.0;
  double cv = 0.0;
  double alpha_ess = 1.0;
};

/// Batch diagnostics and the coefficients derived from them.
struct AlphaSignals {
  double ess_ratio = 1.0;
  double cv_w = 0.0;
  double d_bar = 0.0;
  double delta_sigma = 0.0;
  double alpha_ess = 1.0;
  double alpha_mis = 0.0;
  double alpha_var = 0.0;
  double alpha = 0.0;
};

/// Sample standard deviation with the n-1 divisor; 0 for fewer than two values.
double sample_std(std::span<const double> x);

/// exp(logp_train[t] - logp_rollout[t]).
double token_ratio(const Trajectory& traj, std::size_t t);

/// min(ratio, c).
double truncate(double ratio, double c);

/// r_i - mean(r). Throws std::invalid_argument for fewer than two rewards.
std::vector<double> group_advantage(std::span<const double> rewards);

/// Reliability signal from the coefficient of variation of truncated weights.
/// Throws std::invalid_argument on an empty sequence; one weight gives cv = 0.
EssStats alpha_ess(std::span<const double> truncated_weights);

/// Mean |logp_train - logp_rollout| over every token position in the batch.
double mean_abs_discrepancy(const GroupBatch& batch);

/// min(1, d_bar / delta).
double alpha_mis(double d_bar, double delta);

/// std(A * w) / (std(A) + eps). Throws std::invalid_argument on length mismatch.
double variance_amplification(std::span<const double> advantages, std::span<const double> truncated_weights,
                              double eps);

/// max(0, (delta_sigma - gamma) / gamma).
double alpha_var(double delta_sigma, double gamma);

/// clip(alpha_ess - beta_var * alpha_var, 0, 1) * alpha_mis.
double bilateral_alpha(double alpha_ess, double alpha_var, double alpha_mis, double beta_var);
double bilateral_alpha(const AlphaSignals& signals, double beta_var);

/// Rectification weight 1 + alpha * (w_bar - 1).
double rectification_weight(double w_bar, double alpha);

/// (1 + alpha * (w_bar - 1)) * advantage. Returns `advantage` bitwise when
/// alpha == 0 or w_bar == 1.
double adjusted_advantage(double advantage, double w_bar, double alpha);

/// Token-aligned populations pooled over the whole batch.
struct TokenPopulation {
  std::vector<double> truncated_weights;
  std::vector<double> advantages;
};
TokenPopulation pooled_tokens(const GroupBatch& batch, double c);

/// One set of signals for the whole batch, pooled over all token positions.
AlphaSignals compute_signals(const GroupBatch& batch, const AisConfig& cfg);

}  // namespace aisrl

#endif  // AISRL_ESTIMATOR_HPP
