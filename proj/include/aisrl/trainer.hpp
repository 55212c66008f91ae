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

#ifndef AISRL_TRAINER_HPP
#define AISRL_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aisrl/estimator.hpp"
#include "aisrl/policy.hpp"
#include "aisrl/quantsim.hpp"
#include "aisrl/tasks.hpp"

/**
 * \file
 * \brief GRPO training with a quantized rollout copy and adaptive importance
 * sampling correction.
 *
 * Each iteration: project the current checkpoint onto the rollout grid,
 * sample G completions per prompt from it, score them, evaluate the same
 * tokens under the full-precision policy, derive the rectification weights,
 * take one AdamW step on the clipped surrogate with a reverse-KL penalty, and
 * sync the old policy to the new parameters.
 */

namespace aisrl {

enum class CorrectionMode { kNone, kTis, kAis };

std::string_view to_string(CorrectionMode mode) noexcept;
/// Accepts "none", "tis" or "ais".
CorrectionMode parse_correction_mode(std::string_view name);

struct TrainConfig {
  TaskSpec task;
  QuantSpec quant = QuantSpec::e4m3();
  AisConfig ais;
  PolicyShape policy;

  CorrectionMode correction = CorrectionMode::kAis;
  int group_size = 8;
  int prompts_per_step = 8;
  /// Upper bound on prompt + completion length.
  int horizon = 16;
  /// PPO clip range for the old/new policy ratio.
  double clip_range = 0.2;
  /// Weight of the reverse KL to the frozen initial policy.
  double kl_coeff = 0.01;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  double weight_decay = 0.1;
  double grad_clip = 0.2;
  int total_steps = 2000;
  std::uint64_t seed = 0;
  /// Stddev of the additive Gaussian logit perturbation on the rollout copy.
  double logit_noise_std = 0.0;
  /// Worker threads for rollout and gradient accumulation. Results do not
  /// depend on this value.
  int threads = 1;
  /// Replaces the computed mixing coefficient in AIS mode.
  std::optional<double> alpha_override;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// One training step's record. Field names match the metrics JSONL keys.
struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double loss = 0.0;
  /// Global gradient norm before clipping.
  double grad_norm = 0.0;
  /// Mixing coefficient actually applied: 0 for none, 1 for tis, the gated
  /// (or overridden) value for ais.
  double alpha = 0.0;
  /// Bilateral gate computed from this batch's signals, whatever the mode.
  double alpha_gate = 0.0;
  double alpha_ess = 0.0;
  double alpha_mis = 0.0;
  double alpha_var = 0.0;
  double d_bar = 0.0;
  double delta_sigma = 0.0;
  /// ESS ratio of the truncated rollout/trainer ratios min(rho, C).
  double ess_ratio = 0.0;
  /// Coefficient of variation of min(rho, C).
  double cv_w_bar = 0.0;
  /// Coefficient of variation of the per-token weights the update applied.
  double cv_w = 0.0;
  double kl_rollout_train = 0.0;
  double mean_abs_dp = 0.0;
  double clip_fraction = 0.0;
  /// Mean per-position KL(pi_theta || pi_ref) entering the penalty.
  double kl_ref = 0.0;

  [[nodiscard]] bool all_finite() const noexcept;
};

/// Raised when a loss, gradient or metric turns non-finite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int step) : std::runtime_error(what), step_{step} {}
  [[nodiscard]] int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Per-trajectory, per-token weights multiplying the surrogate.
using RectificationWeights = std::vector<std::vector<double>>;

/// Weights for a batch under the given mode: 1, min(rho, C) or
/// 1 + alpha (min(rho, C) - 1). Ordered group-major, then member.
RectificationWeights rectification_weights(const GroupBatch& batch, CorrectionMode mode, double alpha, double c);

/// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A) and its derivative with
/// respect to log pi_theta. `clipped` is set when the clipped branch binds.
struct SurrogateTerm {
  double value = 0.0;
  double dvalue_dlogp = 0.0;
  bool clipped = false;
};
SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_range);

/// Exact categorical KL(p || q) from log-probabilities.
double categorical_kl(std::span<const double> logp, std::span<const double> logq);

struct LossSettings {
  double clip_range = 0.2;
  double kl_coeff = 0.0;
  int threads = 1;
};

struct LossResult {
  /// Negated objective (minimized).
  double loss = 0.0;
  PolicyParams grad;
  double clip_fraction = 0.0;
  double kl_ref = 0.0;
};

/// The AIS-GRPO loss and its exact gradient with respect to `theta`.
/**
 * The old policy enters through each trajectory's logp_train track, which
 * must hold log pi_{theta_old} evaluated at full precision. Advantages and
 * rectification weights are constants; only log pi_theta carries gradient.
 * Throws NonFiniteError if the loss is not finite.
 */
LossResult ais_grpo_loss(const GroupBatch& batch, const RectificationWeights& weights, const PolicyParams& theta,
                         const PolicyParams& reference, const LossSettings& settings);

/// Mean over batch token positions of KL(pi_rollout || pi_train), both full V-way.
double kl_rollout_train(const GroupBatch& batch, const PolicyInstance& full, const PolicyInstance& quantized);

/// Mean |pi_rollout(x_t) - pi_train(x_t)| over sampled tokens.
double mean_abs_dp(const GroupBatch& batch);

/// Scales `grad` so its norm is at most `max_norm`; returns the norm before scaling.
double clip_grad_norm(PolicyParams& grad, double max_norm);

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(const PolicyShape& shape, double lr, double beta1, double beta2, double eps, double weight_decay);
  void step(PolicyParams& params, const PolicyParams& grad);
  [[nodiscard]] long long steps_taken() const noexcept { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
  long long t_ = 0;
  PolicyParams m_;
  PolicyParams v_;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  /// Starts from given parameters instead of the seeded initialization.
  Trainer(TrainConfig cfg, PolicyParams initial);

  [[nodiscard]] const TrainConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const PolicyParams& params() const noexcept { return params_; }
  [[nodiscard]] const PolicyParams& reference() const noexcept { return reference_; }
  [[nodiscard]] int steps_done() const noexcept { return step_; }

  /// The rollout copy of the current checkpoint.
  [[nodiscard]] PolicyInstance rollout_instance() const;
  /// The full-precision copy of the current checkpoint.
  [[nodiscard]] PolicyInstance train_instance() const;

  /// Samples and scores the batch for `step` from the current checkpoint.
  [[nodiscard]] GroupBatch rollout_step(int step) const;

  /// One full iteration; advances the checkpoint.
  StepMetrics step();

 private:
  TrainConfig cfg_;
  PolicyParams params_;
  PolicyParams reference_;
  AdamW optimizer_;
  RngStream root_;
  std::uint64_t noise_key_;
  int step_ = 0;
};

struct TrainResult {
  std::vector<StepMetrics> metrics;
  PolicyParams final_params;
};

/// Runs cfg.total_steps iterations, calling `on_step` after each.
TrainResult train(const TrainConfig& cfg, const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace aisrl

#endif  // AISRL_TRAINER_HPP
