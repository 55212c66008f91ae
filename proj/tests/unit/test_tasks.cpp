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

#include <gtest/gtest.h>

#include <vector>

#include "aisrl/tasks.hpp"

namespace {

TEST(ModSum, PromptLayoutAndTruth) {
  aisrl::TaskSpec task;
  task.num_terms = 3;
  task.modulus = 10;
  const std::vector<int> operands{7, 8, 9};
  const auto p = aisrl::make_prompt(task, operands);
  EXPECT_EQ(p.truth, (7 + 8 + 9) % 10);
  const int plus = task.plus_token();
  const int eq = task.equals_token();
  EXPECT_EQ(p.tokens, (std::vector<int>{7, plus, 8, plus, 9, eq}));
  EXPECT_EQ(static_cast<int>(p.tokens.size()), task.prompt_len());
}

TEST(Parity, PromptLayoutAndTruth) {
  aisrl::TaskSpec task;
  task.kind = aisrl::TaskKind::kParity;
  task.num_bits = 4;
  const std::vector<int> bits{1, 0, 1, 1};
  const auto p = aisrl::make_prompt(task, bits);
  EXPECT_EQ(p.truth, 1);
  EXPECT_EQ(p.tokens, (std::vector<int>{1, 0, 1, 1, task.equals_token()}));
}

TEST(Reward, FormatAndCorrectness) {
  const aisrl::TaskSpec task;
  const int end = task.end_token();
  EXPECT_DOUBLE_EQ(aisrl::reward(task, std::vector<int>{3, end}, 3), 1.0);
  EXPECT_DOUBLE_EQ(aisrl::reward(task, std::vector<int>{2, end}, 3), 0.2);
  EXPECT_DOUBLE_EQ(aisrl::reward(task, std::vector<int>{3, 3}, 3), 0.8);
  EXPECT_DOUBLE_EQ(aisrl::reward(task, std::vector<int>{end, end}, 3), 0.0);
  EXPECT_DOUBLE_EQ(aisrl::reward(task, std::vector<int>{3}, 3), 0.0);
  EXPECT_DOUBLE_EQ(aisrl::reward(task, aisrl::solution(task, 4), 4), 1.0);
}

TEST(SamplePrompt, TruthMatchesTokens) {
  aisrl::TaskSpec task;
  aisrl::RngStream rng{1};
  for (int i = 0; i < 200; ++i) {
    const auto p = aisrl::sample_prompt(task, rng);
    int sum = 0;
    for (std::size_t k = 0; k < p.tokens.size(); k += 2) {
      sum += p.tokens[k];
    }
    ASSERT_EQ(p.truth, sum % task.modulus);
  }
}

TEST(TaskSpec, Validation) {
  const aisrl::TaskSpec task;
  EXPECT_NO_THROW(task.validate(task.min_vocab(), task.prompt_len() + task.answer_len()));
  EXPECT_THROW(task.validate(task.min_vocab() - 1, 16), std::invalid_argument);
  EXPECT_THROW(task.validate(task.min_vocab(), task.prompt_len() + 1), std::invalid_argument);
  aisrl::TaskSpec bad = task;
  bad.format_weight = 0.5;
  EXPECT_THROW(bad.validate(16, 16), std::invalid_argument);
  EXPECT_THROW((void)aisrl::make_prompt(task, std::vector<int>{1}), std::invalid_argument);
  EXPECT_THROW((void)aisrl::parse_task_kind("sorting"), std::invalid_argument);
}

}  // namespace
