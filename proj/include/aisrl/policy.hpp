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

#ifndef AISRL_POLICY_HPP
#define AISRL_POLICY_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "aisrl/quantsim.hpp"
#include "aisrl/rng.hpp"

/**
 * \file
 * \brief Fixed-window autoregressive softmax policy with analytic gradients.
 *
 * The network embeds the last k tokens (left-padded with a reserved pad
 * token), concatenates the embeddings, applies one tanh hidden layer and a
 * linear head producing V logits.
 */

namespace aisrl {

struct PolicyShape {
  int vocab_size = 8;
  int context_width = 6;
  int embed_dim = 8;
  int hidden_dim = 32;

  /// Reserved embedding row for padding; never a valid output token.
  [[nodiscard]] int pad_token() const noexcept { return vocab_size; }
  void validate() const;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

/// Parameter blocks, in storage order.
enum class Block : std::size_t { kEmbedding = 0, kHiddenWeight, kHiddenBias, kHeadWeight, kHeadBias };
inline constexpr std::size_t kNumBlocks = 5;
inline constexpr std::array<Block, kNumBlocks> kAllBlocks = {
    Block::kEmbedding, Block::kHiddenWeight, Block::kHiddenBias, Block::kHeadWeight, Block::kHeadBias};

std::string_view block_name(Block block) noexcept;

/// Flat storage for every parameter tensor of one policy.
/**
 * Layouts (row-major):
 *   embedding     [V + 1, D]
 *   hidden_weight [H, k * D]
 *   hidden_bias   [H]
 *   head_weight   [V, H]
 *   head_bias     [V]
 *
 * Gradients use the same type, so optimizers and checkpoints only ever see
 * one flat vector.
 */
class PolicyParams {
 public:
  /// All-zero parameters.
  explicit PolicyParams(const PolicyShape& shape);

  [[nodiscard]] const PolicyShape& shape() const noexcept { return shape_; }

  [[nodiscard]] std::span<double> block(Block b) noexcept;
  [[nodiscard]] std::span<const double> block(Block b) const noexcept;
  [[nodiscard]] std::vector<std::size_t> block_shape(Block b) const;

  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  void fill(double value);
  /// this += scale * other. Shapes must match.
  void add_scaled(const PolicyParams& other, double scale);
  [[nodiscard]] double squared_norm() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  PolicyShape shape_;
  std::array<std::size_t, kNumBlocks + 1> offsets_{};
  std::vector<double> values_;
};

/// Gaussian initialization scaled by 1/sqrt(fan_in); biases start at zero.
PolicyParams init_params(const PolicyShape& shape, RngStream rng);

/// Optional additive logit perturbation applied to a rollout instance.
/**
 * The noise is a deterministic function of (key, context window), so the
 * perturbed policy is a fixed distribution that can be evaluated repeatedly.
 */
struct LogitNoise {
  double stddev = 0.0;
  std::uint64_t key = 0;
};

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<int> window;
  std::vector<double> input;
  std::vector<double> hidden;
  std::vector<double> logits;
};

/// A policy evaluated through a particular numeric grid.
/**
 * Weights are projected once at construction (one projection per
 * checkpoint sync). With QuantSpec::full() and no noise the instance runs
 * exactly the trainer's code path, so its distributions are bitwise equal to
 * the full-precision policy.
 */
class PolicyInstance {
 public:
  PolicyInstance(const PolicyParams& params, const QuantSpec& spec, LogitNoise noise = {});

  [[nodiscard]] const PolicyParams& weights() const noexcept { return weights_; }
  [[nodiscard]] const QuantSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const PolicyShape& shape() const noexcept { return weights_.shape(); }
  [[nodiscard]] int vocab_size() const noexcept { return weights_.shape().vocab_size; }

  /// Throws std::out_of_range for a token id outside [0, V).
  [[nodiscard]] std::vector<double> logits(std::span<const int> context) const;
  [[nodiscard]] std::vector<double> log_probs(std::span<const int> context) const;
  [[nodiscard]] double log_prob(std::span<const int> context, int token) const;

  /// Forward pass that also fills the backprop cache.
  std::vector<double> forward(std::span<const int> context, ForwardCache& cache) const;

 private:
  PolicyParams weights_;
  QuantSpec spec_;
  LogitNoise noise_;
};

/// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> logits);

/// Tokens and their sampling-time log-probabilities.
struct SampledSequence {
  std::vector<int> tokens;
  std::vector<double> log_probs;
};

/// Ancestral sampling at temperature 1 for `horizon` tokens after `prompt`.
SampledSequence sample_sequence(const PolicyInstance& inst, std::span<const int> prompt, int horizon, RngStream& rng);

/// Greedy argmax decoding (evaluation only).
std::vector<int> greedy_sequence(const PolicyInstance& inst, std::span<const int> prompt, int horizon);

/// Accumulates d(objective)/d(params) into `grad` given d(objective)/d(logits).
/**
 * `cache` must come from a full-precision forward pass over `params`;
 * gradients are never taken through a quantizer.
 */
void backward(const PolicyParams& params, const ForwardCache& cache, std::span<const double> dlogits,
              PolicyParams& grad);

/// Exact gradient of log pi(token | context) with respect to every parameter.
PolicyParams grad_log_prob(const PolicyParams& params, std::span<const int> context, int token);

}  // namespace aisrl

#endif  // AISRL_POLICY_HPP
