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

#ifndef AISRL_RNG_HPP
#define AISRL_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

/**
 * \file
 * \brief Hierarchical, named random streams derived from a single root seed.
 */

namespace aisrl {

/// A random stream addressed by a path of names and indices below a root seed.
/**
 * Children are derived from the parent's key only, never from the parent's
 * engine state, so drawing from one stream never perturbs another. This is
 * what lets any (step, prompt, member) triple be replayed in isolation and
 * makes parallel and serial rollouts produce identical trajectories.
 */
class RngStream {
 public:
  explicit RngStream(std::uint64_t key);

  [[nodiscard]] RngStream child(std::string_view name) const;
  [[nodiscard]] RngStream child(std::uint64_t index) const;

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  /// Uniform in [0, 1).
  double uniform();
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  /// Index drawn proportionally to the given non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Stable hash of a token sequence, used to key per-context streams.
std::uint64_t hash_tokens(std::uint64_t seed, std::span<const int> tokens) noexcept;

}  // namespace aisrl

#endif  // AISRL_RNG_HPP
