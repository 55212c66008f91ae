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

#include "aisrl/tasks.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace aisrl {

std::string_view to_string(TaskKind kind) noexcept {
  return kind == TaskKind::kModSum ? "modsum" : "parity";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "modsum") {
    return TaskKind::kModSum;
  }
  if (name == "parity") {
    return TaskKind::kParity;
  }
  throw std::invalid_argument(fmt::format("unknown task kind '{}' (expected modsum or parity)", name));
}

int TaskSpec::prompt_len() const noexcept {
  // "d + d + ... + d =" or "b b ... b ="
  return kind == TaskKind::kModSum ? 2 * num_terms : num_bits + 1;
}

void TaskSpec::validate(int vocab_size, int horizon) const {
  if (kind == TaskKind::kModSum) {
    if (num_terms < 1) {
      throw std::invalid_argument(fmt::format("task.num_terms must be >= 1, got {}", num_terms));
    }
    if (modulus < 2) {
      throw std::invalid_argument(fmt::format("task.modulus must be >= 2, got {}", modulus));
    }
  } else if (num_bits < 1) {
    throw std::invalid_argument(fmt::format("task.num_bits must be >= 1, got {}", num_bits));
  }
  if (format_weight < 0.0 || correct_weight < 0.0 || std::abs(format_weight + correct_weight - 1.0) > 1e-12) {
    throw std::invalid_argument(fmt::format("task.format_weight + task.correct_weight must equal 1 (got {} + {})",
                                            format_weight, correct_weight));
  }
  if (vocab_size < min_vocab()) {
    throw std::invalid_argument(
        fmt::format("vocab_size {} too small for task (needs at least {})", vocab_size, min_vocab()));
  }
  if (prompt_len() + answer_len() > horizon) {
    throw std::invalid_argument(fmt::format("prompt_len + answer_len = {} exceeds horizon {}",
                                            prompt_len() + answer_len(), horizon));
  }
}

Prompt make_prompt(const TaskSpec& task, std::span<const int> operands) {
  Prompt prompt;
  if (task.kind == TaskKind::kModSum) {
    if (static_cast<int>(operands.size()) != task.num_terms) {
      throw std::invalid_argument(fmt::format("expected {} addends, got {}", task.num_terms, operands.size()));
    }
    int sum = 0;
    for (std::size_t i = 0; i < operands.size(); ++i) {
      const int digit = operands[i];
      if (digit < 0 || digit >= task.modulus) {
        throw std::invalid_argument(fmt::format("addend {} outside [0, {})", digit, task.modulus));
      }
      if (i > 0) {
        prompt.tokens.push_back(task.plus_token());
      }
      prompt.tokens.push_back(digit);
      sum += digit;
    }
    prompt.truth = sum % task.modulus;
  } else {
    if (static_cast<int>(operands.size()) != task.num_bits) {
      throw std::invalid_argument(fmt::format("expected {} bits, got {}", task.num_bits, operands.size()));
    }
    int parity = 0;
    for (const int bit : operands) {
      if (bit != 0 && bit != 1) {
        throw std::invalid_argument(fmt::format("bit value {} is not 0 or 1", bit));
      }
      prompt.tokens.push_back(bit);
      parity ^= bit;
    }
    prompt.truth = parity;
  }
  prompt.tokens.push_back(task.equals_token());
  return prompt;
}

Prompt sample_prompt(const TaskSpec& task, RngStream& rng) {
  std::vector<int> operands;
  if (task.kind == TaskKind::kModSum) {
    for (int i = 0; i < task.num_terms; ++i) {
      operands.push_back(rng.uniform_int(0, task.modulus - 1));
    }
  } else {
    for (int i = 0; i < task.num_bits; ++i) {
      operands.push_back(rng.uniform_int(0, 1));
    }
  }
  return make_prompt(task, operands);
}

double reward(const TaskSpec& task, std::span<const int> completion, int truth) {
  if (static_cast<int>(completion.size()) != task.answer_len()) {
    return 0.0;
  }
  const int answer = completion[0];
  const bool is_digit = answer >= 0 && answer < task.num_digits();
  double total = 0.0;
  if (is_digit && completion[1] == task.end_token()) {
    total += task.format_weight;
  }
  if (is_digit && answer == truth) {
    total += task.correct_weight;
  }
  return total;
}

std::vector<int> solution(const TaskSpec& task, int truth) { return {truth, task.end_token()}; }

}  // namespace aisrl
