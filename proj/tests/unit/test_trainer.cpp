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

#include <cmath>
#include <vector>

#include "aisrl/trainer.hpp"

namespace {

aisrl::TrainConfig small_config(aisrl::QuantSpec quant, aisrl::CorrectionMode mode) {
  aisrl::TrainConfig cfg;
  cfg.quant = quant;
  cfg.correction = mode;
  cfg.group_size = 4;
  cfg.prompts_per_step = 3;
  cfg.total_steps = 10;
  cfg.seed = 17;
  return cfg;
}

// A batch whose trajectories carry logp_train evaluated under `params`.
aisrl::GroupBatch consistent_batch(const aisrl::PolicyParams& params, std::vector<double> advantages,
                                   std::vector<std::vector<int>> completions) {
  const aisrl::PolicyInstance inst{params, aisrl::QuantSpec::full()};
  aisrl::Group group;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    aisrl::Trajectory t;
    t.prompt = {1, 2};
    t.completion = completions[i];
    std::vector<int> ctx = t.prompt;
    for (const int tok : t.completion) {
      const double lp = inst.log_prob(ctx, tok);
      t.logp_train.push_back(lp);
      t.logp_rollout.push_back(lp - 0.05);
      ctx.push_back(tok);
    }
    t.advantage = advantages[i];
    group.members.push_back(std::move(t));
  }
  aisrl::GroupBatch batch;
  batch.groups.push_back(std::move(group));
  return batch;
}

aisrl::RectificationWeights unit_weights(const aisrl::GroupBatch& batch) {
  aisrl::RectificationWeights w;
  for (const auto& g : batch.groups) {
    for (const auto& t : g.members) {
      w.emplace_back(t.length(), 1.0);
    }
  }
  return w;
}

TEST(ClippedSurrogate, Examples) {
  const auto on = aisrl::clipped_surrogate(1.0, 0.7, 0.2);
  EXPECT_EQ(on.value, 0.7);
  EXPECT_FALSE(on.clipped);

  const auto high = aisrl::clipped_surrogate(1.5, 2.0, 0.2);
  EXPECT_DOUBLE_EQ(high.value, 1.2 * 2.0);
  EXPECT_TRUE(high.clipped);
  EXPECT_EQ(high.dvalue_dlogp, 0.0);

  const auto pessimistic = aisrl::clipped_surrogate(1.5, -2.0, 0.2);
  EXPECT_DOUBLE_EQ(pessimistic.value, -3.0);
  EXPECT_FALSE(pessimistic.clipped);

  const auto low = aisrl::clipped_surrogate(0.5, -1.0, 0.2);
  EXPECT_DOUBLE_EQ(low.value, -0.8);
  EXPECT_TRUE(low.clipped);
}

TEST(AisGrpoLoss, SingleTokenSignConvention) {
  const aisrl::PolicyShape shape;
  const auto params = aisrl::init_params(shape, aisrl::RngStream{1});
  const auto batch = consistent_batch(params, {0.7, 0.7}, {{3}, {4}});
  const auto result = aisrl::ais_grpo_loss(batch, unit_weights(batch), params, params, {0.2, 0.0, 1});
  EXPECT_DOUBLE_EQ(result.loss, -0.7);
  EXPECT_EQ(result.clip_fraction, 0.0);
}

TEST(AisGrpoLoss, ClippedBranchScalesWithWeight) {
  const aisrl::PolicyShape shape;
  const auto params = aisrl::init_params(shape, aisrl::RngStream{2});
  auto batch = consistent_batch(params, {1.0, 1.0}, {{3}, {4}});
  for (auto& t : batch.groups[0].members) {
    t.logp_train[0] -= std::log(1.5);
  }
  aisrl::RectificationWeights w{{0.5}, {0.5}};
  const auto result = aisrl::ais_grpo_loss(batch, w, params, params, {0.2, 0.0, 1});
  EXPECT_NEAR(result.loss, -1.2 * 0.5, 1e-12);
  EXPECT_EQ(result.clip_fraction, 1.0);
}

TEST(AisGrpoLoss, GradientMatchesFiniteDifferences) {
  const aisrl::PolicyShape shape{8, 4, 3, 6};
  const auto old_params = aisrl::init_params(shape, aisrl::RngStream{3});
  const auto reference = aisrl::init_params(shape, aisrl::RngStream{4});
  const auto batch = consistent_batch(old_params, {0.6, -0.4, -0.2}, {{1, 5}, {2}, {7, 0, 3}});
  auto theta = old_params;
  aisrl::RngStream rng{5};
  for (double& v : theta.values()) {
    v += 1e-3 * rng.normal();
  }
  const aisrl::RectificationWeights w{{1.3, 0.8}, {1.1}, {0.9, 1.0, 2.0}};
  const aisrl::LossSettings settings{0.2, 0.05, 1};
  const auto result = aisrl::ais_grpo_loss(batch, w, theta, reference, settings);
  ASSERT_EQ(result.clip_fraction, 0.0);

  constexpr double kStep = 1e-5;
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta.values()[i];
    theta.values()[i] = saved + kStep;
    const double up = aisrl::ais_grpo_loss(batch, w, theta, reference, settings).loss;
    theta.values()[i] = saved - kStep;
    const double down = aisrl::ais_grpo_loss(batch, w, theta, reference, settings).loss;
    theta.values()[i] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    diff += std::pow(result.grad.values()[i] - numeric, 2);
    norm += numeric * numeric;
  }
  EXPECT_LT(std::sqrt(diff / norm), 1e-4);
}

TEST(AisGrpoLoss, KlPenaltyIsNonNegative) {
  const aisrl::PolicyShape shape;
  const auto theta = aisrl::init_params(shape, aisrl::RngStream{6});
  const auto reference = aisrl::init_params(shape, aisrl::RngStream{7});
  const auto batch = consistent_batch(theta, {0.0, 0.0}, {{3, 1}, {4}});
  const auto result = aisrl::ais_grpo_loss(batch, unit_weights(batch), theta, reference, {0.2, 1.0, 1});
  EXPECT_GT(result.kl_ref, 0.0);
  EXPECT_GT(result.loss, 0.0);
}

TEST(ClipGradNorm, RespectsLimit) {
  aisrl::PolicyParams g{aisrl::PolicyShape{}};
  aisrl::RngStream rng{8};
  for (double& v : g.values()) {
    v = rng.normal();
  }
  const double before = std::sqrt(g.squared_norm());
  EXPECT_DOUBLE_EQ(aisrl::clip_grad_norm(g, 0.2), before);
  EXPECT_LE(std::sqrt(g.squared_norm()), 0.2 + 1e-9);

  aisrl::PolicyParams small{aisrl::PolicyShape{}};
  small.fill(1e-6);
  const auto copy = small;
  (void)aisrl::clip_grad_norm(small, 0.2);
  EXPECT_EQ(small, copy);
}

TEST(AdamW, FirstStepMatchesHandComputation) {
  const aisrl::PolicyShape shape{2, 1, 1, 1};
  aisrl::PolicyParams p{shape};
  aisrl::PolicyParams g{shape};
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.values()[i] = 0.5 + 0.1 * static_cast<double>(i);
    g.values()[i] = (i % 2 == 0 ? 1.0 : -1.0) * 0.01 * static_cast<double>(i + 1);
  }
  const auto start = p;
  aisrl::AdamW opt{shape, 1e-3, 0.9, 0.99, 1e-8, 0.1};
  opt.step(p, g);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double decayed = start.values()[i] * (1.0 - 1e-3 * 0.1);
    const double gi = g.values()[i];
    const double expected = decayed - 1e-3 * gi / (std::abs(gi) + 1e-8);
    EXPECT_NEAR(p.values()[i], expected, 1e-15);
  }
  EXPECT_EQ(opt.steps_taken(), 1);
}

TEST(Trainer, FullPrecisionTracksAreIdentical) {
  const aisrl::Trainer trainer{small_config(aisrl::QuantSpec::full(), aisrl::CorrectionMode::kAis)};
  const auto batch = trainer.rollout_step(0);
  for (const auto& g : batch.groups) {
    for (const auto& t : g.members) {
      EXPECT_EQ(t.logp_rollout, t.logp_train);
    }
  }
  EXPECT_EQ(aisrl::mean_abs_discrepancy(batch), 0.0);
}

TEST(Trainer, RolloutReplaysForFixedSeed) {
  const auto cfg = small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis);
  const auto a = aisrl::Trainer{cfg}.rollout_step(3);
  const auto b = aisrl::Trainer{cfg}.rollout_step(3);
  ASSERT_EQ(a.groups.size(), b.groups.size());
  for (std::size_t k = 0; k < a.groups.size(); ++k) {
    for (std::size_t i = 0; i < a.groups[k].members.size(); ++i) {
      const auto& x = a.groups[k].members[i];
      const auto& y = b.groups[k].members[i];
      EXPECT_EQ(x.prompt, y.prompt);
      EXPECT_EQ(x.completion, y.completion);
      EXPECT_EQ(x.logp_rollout, y.logp_rollout);
      EXPECT_EQ(x.logp_train, y.logp_train);
      EXPECT_EQ(x.advantage, y.advantage);
    }
  }
}

TEST(Trainer, QuantizedRolloutHasMismatch) {
  aisrl::Trainer trainer{small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis)};
  for (int s = 0; s < 10; ++s) {
    const auto m = trainer.step();
    EXPECT_GT(m.d_bar, 0.0);
    EXPECT_LE(m.ess_ratio, 1.0);
    EXPECT_GE(m.kl_rollout_train, -1e-12);
    EXPECT_GE(m.mean_abs_dp, 0.0);
    EXPECT_LE(m.mean_abs_dp, 1.0);
    EXPECT_EQ(m.clip_fraction, 0.0);
    EXPECT_GE(m.kl_ref, 0.0);
    EXPECT_TRUE(m.all_finite());
  }
}

TEST(Trainer, ForcedZeroAlphaEqualsUncorrected) {
  auto ais = small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis);
  ais.alpha_override = 0.0;
  const auto none = small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kNone);
  aisrl::Trainer a{ais};
  aisrl::Trainer b{none};
  for (int s = 0; s < 20; ++s) {
    const auto ma = a.step();
    const auto mb = b.step();
    ASSERT_EQ(ma.loss, mb.loss) << "step " << s;
    ASSERT_EQ(ma.grad_norm, mb.grad_norm) << "step " << s;
    ASSERT_EQ(a.params(), b.params()) << "step " << s;
  }
}

TEST(Trainer, FullPrecisionAisMatchesUncorrected) {
  aisrl::Trainer a{small_config(aisrl::QuantSpec::full(), aisrl::CorrectionMode::kAis)};
  aisrl::Trainer b{small_config(aisrl::QuantSpec::full(), aisrl::CorrectionMode::kNone)};
  for (int s = 0; s < 20; ++s) {
    const auto ma = a.step();
    const auto mb = b.step();
    ASSERT_EQ(ma.alpha, 0.0);
    ASSERT_EQ(ma.loss, mb.loss);
    ASSERT_EQ(a.params(), b.params());
  }
}

TEST(Trainer, ThreadCountDoesNotChangeResults) {
  auto one = small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis);
  auto four = one;
  four.threads = 4;
  aisrl::Trainer a{one};
  aisrl::Trainer b{four};
  for (int s = 0; s < 5; ++s) {
    const auto ma = a.step();
    const auto mb = b.step();
    ASSERT_EQ(ma.loss, mb.loss);
    ASSERT_EQ(ma.alpha, mb.alpha);
  }
  EXPECT_EQ(a.params(), b.params());
}

TEST(Trainer, GradClipIsRespected) {
  auto cfg = small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kTis);
  aisrl::Trainer trainer{cfg};
  const auto batch = trainer.rollout_step(0);
  const auto w = aisrl::rectification_weights(batch, cfg.correction, 1.0, cfg.ais.c);
  auto loss = aisrl::ais_grpo_loss(batch, w, trainer.params(), trainer.reference(), {cfg.clip_range, cfg.kl_coeff, 1});
  (void)aisrl::clip_grad_norm(loss.grad, cfg.grad_clip);
  EXPECT_LE(std::sqrt(loss.grad.squared_norm()), cfg.grad_clip + 1e-9);
}

TEST(RectificationWeights, Modes) {
  const aisrl::PolicyShape shape;
  const auto params = aisrl::init_params(shape, aisrl::RngStream{9});
  auto batch = consistent_batch(params, {0.5, -0.5}, {{3}, {4}});
  batch.groups[0].members[0].logp_train[0] = batch.groups[0].members[0].logp_rollout[0] + std::log(10.0);
  const auto none = aisrl::rectification_weights(batch, aisrl::CorrectionMode::kNone, 0.3, 5.0);
  const auto tis = aisrl::rectification_weights(batch, aisrl::CorrectionMode::kTis, 0.3, 5.0);
  const auto ais = aisrl::rectification_weights(batch, aisrl::CorrectionMode::kAis, 0.3, 5.0);
  EXPECT_EQ(none[0][0], 1.0);
  EXPECT_NEAR(tis[0][0], 5.0, 1e-12);
  EXPECT_NEAR(ais[0][0], 1.0 + 0.3 * 4.0, 1e-12);
  const double w1 = aisrl::token_ratio(batch.groups[0].members[1], 0);
  EXPECT_EQ(tis[1][0], w1);
}

TEST(KlRolloutTrain, MatchesNaivePositionSum) {
  aisrl::Trainer trainer{small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis)};
  const auto batch = trainer.rollout_step(0);
  const auto full = trainer.train_instance();
  const auto quant = trainer.rollout_instance();
  double total = 0.0;
  int n = 0;
  for (const auto& g : batch.groups) {
    for (const auto& t : g.members) {
      std::vector<int> ctx = t.prompt;
      for (std::size_t k = 0; k < t.length(); ++k) {
        const auto lq = quant.log_probs(ctx);
        const auto lp = full.log_probs(ctx);
        for (std::size_t v = 0; v < lq.size(); ++v) {
          total += std::exp(lq[v]) * (lq[v] - lp[v]);
        }
        ++n;
        ctx.push_back(t.completion[k]);
      }
    }
  }
  const double kl = aisrl::kl_rollout_train(batch, full, quant);
  EXPECT_NEAR(kl, total / n, 1e-10);
  EXPECT_GE(kl, -1e-12);
  EXPECT_EQ(aisrl::kl_rollout_train(batch, full, full), 0.0);
}

TEST(MeanAbsDp, MatchesNaiveLoop) {
  aisrl::Trainer trainer{small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis)};
  const auto batch = trainer.rollout_step(1);
  double total = 0.0;
  int n = 0;
  for (const auto& g : batch.groups) {
    for (const auto& t : g.members) {
      for (std::size_t k = 0; k < t.length(); ++k) {
        total += std::abs(std::exp(t.logp_rollout[k]) - std::exp(t.logp_train[k]));
        ++n;
      }
    }
  }
  EXPECT_NEAR(aisrl::mean_abs_dp(batch), total / n, 1e-12);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto cfg = small_config(aisrl::QuantSpec::e4m3(), aisrl::CorrectionMode::kAis);
  const auto a = aisrl::train(cfg);
  const auto b = aisrl::train(cfg);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
    EXPECT_EQ(a.metrics[i].mean_reward, b.metrics[i].mean_reward);
    EXPECT_EQ(a.metrics[i].alpha, b.metrics[i].alpha);
  }
  EXPECT_EQ(a.final_params, b.final_params);
}

TEST(Train, RewardImprovesOnModSum) {
  aisrl::TrainConfig cfg;
  cfg.quant = aisrl::QuantSpec::full();
  cfg.total_steps = 400;
  const auto result = aisrl::train(cfg);
  double first = 0.0;
  double last = 0.0;
  for (int i = 0; i < 50; ++i) {
    first += result.metrics[static_cast<std::size_t>(i)].mean_reward;
    last += result.metrics[result.metrics.size() - 1 - static_cast<std::size_t>(i)].mean_reward;
  }
  EXPECT_GT(last / 50.0, first / 50.0 + 0.05);
}

TEST(TrainConfig, ValidationNamesField) {
  aisrl::TrainConfig cfg;
  cfg.group_size = 1;
  try {
    cfg.validate();
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("group_size"), std::string::npos);
  }
  cfg = {};
  cfg.clip_range = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.kl_coeff = -0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
