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

#ifndef AISRL_THEORY_HPP
#define AISRL_THEORY_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aisrl/rng.hpp"

/**
 * \file
 * \brief Exact, enumeration-based analysis of the mixed estimator
 *
 *   g_hat(alpha) = E_rollout[(1 - alpha + alpha * w_bar(x)) A(x) s(x)]
 *
 * against the on-policy gradient g = E_train[A(x) s(x)], on outcome spaces
 * small enough to sum over exhaustively.
 */

namespace aisrl::theory {

/// Largest outcome space accepted for exact enumeration.
inline constexpr std::size_t kMaxOutcomes = 256;

/// A fully enumerated estimation problem.
struct EnumInstance {
  std::vector<double> p_train;
  std::vector<double> p_rollout;
  std::vector<double> advantage;
  /// One score vector per outcome, all of the same dimension.
  std::vector<std::vector<double>> scores;
  /// Truncation threshold; empty means no truncation.
  std::optional<double> c;

  [[nodiscard]] std::size_t size() const noexcept { return p_train.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return scores.empty() ? 0 : scores.front().size(); }
  /// min(p_train / p_rollout, c), or the raw ratio without truncation.
  [[nodiscard]] double w_bar(std::size_t x) const;
  /// max |A(x)| over outcomes.
  [[nodiscard]] double max_abs_advantage() const;
  /// max ||s(x)|| over outcomes.
  [[nodiscard]] double max_score_norm() const;

  /// Checks normalization, absolute continuity, consistent sizes and the
  /// outcome cap. Throws std::invalid_argument.
  void validate() const;
};

/// Options for instances built from the tiny autoregressive policy.
struct PolicyInstanceOptions {
  int vocab_size = 3;
  int horizon = 3;
  /// Stddev of the Gaussian parameter draw.
  double param_scale = 1.0;
  /// Stddev of the perturbation applied to get the rollout parameters; 0
  /// makes the two distributions identical.
  double mismatch_scale = 0.3;
  std::optional<double> c = 5.0;
};

/// Builds an instance from a one-layer autoregressive softmax policy over
/// V^T sequences: logits(x_t) = M[x_{t-1}] + P[t], with a start row for t = 0.
/// Scores are the exact gradients of log pi_train(x) with respect to (M, P).
/// Advantages are uniform on [-1, 1]. Throws if V^T exceeds kMaxOutcomes.
EnumInstance make_policy_instance(const PolicyInstanceOptions& options, RngStream rng);

/// Builds a synthetic, untruncated instance in which one outcome is rare under
/// the rollout distribution but likely under the train distribution, so the
/// importance-weighted variance dominates. Used for the simplified-oracle check.
EnumInstance make_dominant_variance_instance(RngStream rng);

struct GradientTerms {
  std::vector<double> g;
  std::vector<double> g0;
  std::vector<double> g1;
  std::vector<double> b0;
  std::vector<double> b1;
};

/// g, g_hat_0, g_hat_1 and the two biases by exact summation.
GradientTerms exact_gradients(const EnumInstance& inst);

/// Trace covariances of the two endpoint estimators and their cross term.
struct VarianceTerms {
  double sigma0_sq = 0.0;
  double sigma1_sq = 0.0;
  double kappa = 0.0;
};
VarianceTerms variance_terms(const EnumInstance& inst);

/// Everything the surrogate MSE needs. b1 is set to zero in the surrogate;
/// `b1_over_b0` reports how well that assumption holds on the instance.
struct MseTerms {
  double b0_sq = 0.0;
  double sigma0_sq = 0.0;
  double sigma1_sq = 0.0;
  double kappa = 0.0;
  double b1_over_b0 = 0.0;
};
MseTerms mse_terms(const EnumInstance& inst);

/// (1-a)^2 ||b0||^2 + (1-a)^2 sigma0^2 + a^2 sigma1^2 + 2 a (1-a) kappa.
double mse_at(const MseTerms& terms, double alpha);
std::vector<double> mse_curve(const EnumInstance& inst, std::span<const double> alphas);

struct OracleAlpha {
  /// Clamped to [0, 1].
  double alpha = 0.0;
  /// Set when the denominator vanishes; alpha is then reported as 0.
  bool degenerate = false;
};

/// (||b0||^2 + sigma0^2 - kappa) / (||b0||^2 + sigma0^2 + sigma1^2 - 2 kappa).
OracleAlpha oracle_alpha_exact(const MseTerms& terms);
OracleAlpha oracle_alpha_exact(const EnumInstance& inst);
/// ||b0||^2 / (||b0||^2 + sigma1^2).
OracleAlpha oracle_alpha_simplified(const MseTerms& terms);
OracleAlpha oracle_alpha_simplified(const EnumInstance& inst);

struct BoundCheck {
  bool holds = false;
  double second_moment = 0.0;
  double bound = 0.0;
  /// bound - second_moment.
  double slack = 0.0;
};

/// Compares the exact per-sample second moment E_rollout ||(1 - a + a w_bar) A s||^2
/// (with w_bar truncated at inst.c) against (1 + a (c - 1))^2 M_A^2 M_s^2.
/// `c` is the threshold the bound is evaluated with; it should equal inst.c.
BoundCheck check_second_moment_bound(const EnumInstance& inst, double alpha, double c);

struct RecoveryCheck {
  bool holds = false;
  double max_abs_diff = 0.0;
};

/// Exact AIS expectation under per-outcome gating alpha(x) versus g.
/// Holds when every component agrees within `tol`.
RecoveryCheck check_on_policy_recovery(const EnumInstance& inst, std::span<const double> gating, double tol = 1e-12);

/// Randomized verification suite settings.
struct SuiteOptions {
  int num_instances = 100;
  std::uint64_t seed = 0;
  /// Points in the MSE grid; spacing is 1 / (grid_points - 1).
  int grid_points = 10001;
  /// The bound check runs on ten times num_instances instances, each at
  /// alpha in {0, .5, 1} and C in {1, 2, 5}.
  double dominance_tol = 0.02;
  /// Multiplies the C passed to the bound check. Values other than 1 exist to
  /// confirm the checker can fail.
  double bound_c_scale = 1.0;
};

struct CheckSummary {
  int checked = 0;
  int failed = 0;
  double worst = 0.0;
  std::optional<std::uint64_t> first_failing_seed;
};

struct SuiteReport {
  CheckSummary oracle_grid;         ///< worst: max |closed form - grid argmin|
  CheckSummary oracle_minimum;      ///< worst: max MSE(closed form) - min grid MSE
  CheckSummary simplified_oracle;   ///< worst: max |simplified - exact|
  CheckSummary second_moment;       ///< worst: min slack
  CheckSummary on_policy_recovery;  ///< worst: max abs diff
  CheckSummary is_unbiased;         ///< worst: max abs diff
  double max_b1_over_b0 = 0.0;
  double grid_spacing = 0.0;

  [[nodiscard]] bool passed() const noexcept;
};

/// Runs every property check over seeded random instances.
SuiteReport run_suite(const SuiteOptions& options);

/// Serializes a report as a JSON document.
std::string report_to_json(const SuiteReport& report, const SuiteOptions& options);

}  // namespace aisrl::theory

#endif  // AISRL_THEORY_HPP
