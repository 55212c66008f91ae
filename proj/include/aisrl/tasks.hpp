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

#ifndef AISRL_TASKS_HPP
#define AISRL_TASKS_HPP

#include <span>
#include <string_view>
#include <vector>

#include "aisrl/rng.hpp"

/**
 * \file
 * \brief Verifiable-reward toy tasks.
 *
 * Token layout for both tasks: digit symbols occupy ids [0, num_digits), then
 * '+', '=' and the end-of-answer marker follow. A completion is two tokens,
 * an answer digit and the end marker.
 */

namespace aisrl {

enum class TaskKind { kModSum, kParity };

std::string_view to_string(TaskKind kind) noexcept;
/// Accepts "modsum" or "parity".
TaskKind parse_task_kind(std::string_view name);

struct TaskSpec {
  TaskKind kind = TaskKind::kModSum;
  /// ModSum: number of addends.
  int num_terms = 2;
  /// ModSum: digits and the answer live in [0, modulus).
  int modulus = 5;
  /// Parity: length of the bit string.
  int num_bits = 4;
  double format_weight = 0.2;
  double correct_weight = 0.8;

  [[nodiscard]] int num_digits() const noexcept { return kind == TaskKind::kModSum ? modulus : 2; }
  [[nodiscard]] int plus_token() const noexcept { return num_digits(); }
  [[nodiscard]] int equals_token() const noexcept { return num_digits() + 1; }
  [[nodiscard]] int end_token() const noexcept { return num_digits() + 2; }
  /// Smallest vocabulary that can express the task.
  [[nodiscard]] int min_vocab() const noexcept { return num_digits() + 3; }

  [[nodiscard]] int prompt_len() const noexcept;
  [[nodiscard]] int answer_len() const noexcept { return 2; }

  /// Throws std::invalid_argument on a malformed spec or one that does not fit
  /// the given vocabulary size and horizon.
  void validate(int vocab_size, int horizon) const;
};

struct Prompt {
  std::vector<int> tokens;
  int truth = 0;
};

/// Encodes explicit operands: ModSum digits or Parity bits.
Prompt make_prompt(const TaskSpec& task, std::span<const int> operands);

/// Draws operands uniformly; deterministic given the stream.
Prompt sample_prompt(const TaskSpec& task, RngStream& rng);

/// Reward in [0, 1]: format_weight for [digit, end], plus correct_weight
/// when the answer digit equals the truth.
double reward(const TaskSpec& task, std::span<const int> completion, int truth);

/// The unique completion earning full reward.
std::vector<int> solution(const TaskSpec& task, int truth);

}  // namespace aisrl

#endif  // AISRL_TASKS_HPP
