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

#include "aisrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "parallel.hpp"

namespace aisrl {

std::string_view to_string(CorrectionMode mode) noexcept {
  switch (mode) {
    case CorrectionMode::kNone:
      return "none";
    case CorrectionMode::kTis:
      return "tis";
    case CorrectionMode::kAis:
      return "ais";
  }
  return "none";
}

CorrectionMode parse_correction_mode(std::string_view name) {
  if (name == "none") {
    return CorrectionMode::kNone;
  }
  if (name == "tis") {
    return CorrectionMode::kTis;
  }
  if (name == "ais") {
    return CorrectionMode::kAis;
  }
  throw std::invalid_argument(fmt::format("unknown correction mode '{}' (expected none, tis or ais)", name));
}

void TrainConfig::validate() const {
  quant.validate();
  ais.validate();
  policy.validate();
  task.validate(policy.vocab_size, horizon);
  if (group_size < 2) {
    throw std::invalid_argument(fmt::format("trainer.group_size must be >= 2, got {}", group_size));
  }
  if (prompts_per_step < 1) {
    throw std::invalid_argument(fmt::format("trainer.prompts_per_step must be >= 1, got {}", prompts_per_step));
  }
  if (!(clip_range > 0.0 && clip_range < 1.0)) {
    throw std::invalid_argument(fmt::format("trainer.clip_range must be in (0, 1), got {}", clip_range));
  }
  if (!(kl_coeff >= 0.0)) {
    throw std::invalid_argument(fmt::format("trainer.kl_coeff must be >= 0, got {}", kl_coeff));
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument(fmt::format("trainer.learning_rate must be > 0, got {}", learning_rate));
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("trainer.adam_beta1 and trainer.adam_beta2 must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) {
    throw std::invalid_argument(fmt::format("trainer.adam_eps must be > 0, got {}", adam_eps));
  }
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument(fmt::format("trainer.weight_decay must be >= 0, got {}", weight_decay));
  }
  if (!(grad_clip > 0.0)) {
    throw std::invalid_argument(fmt::format("trainer.grad_clip must be > 0, got {}", grad_clip));
  }
  if (total_steps < 0) {
    throw std::invalid_argument(fmt::format("trainer.total_steps must be >= 0, got {}", total_steps));
  }
  if (!(logit_noise_std >= 0.0)) {
    throw std::invalid_argument(fmt::format("trainer.logit_noise_std must be >= 0, got {}", logit_noise_std));
  }
  if (threads < 1) {
    throw std::invalid_argument(fmt::format("trainer.threads must be >= 1, got {}", threads));
  }
  if (alpha_override && !(*alpha_override >= 0.0 && *alpha_override <= 1.0)) {
    throw std::invalid_argument(fmt::format("trainer.alpha_override must be in [0, 1], got {}", *alpha_override));
  }
}

bool StepMetrics::all_finite() const noexcept {
  const double values[] = {mean_reward, loss,        grad_norm, alpha,    alpha_gate,       alpha_ess,
                           alpha_mis,   alpha_var,   d_bar,     delta_sigma, ess_ratio,     cv_w_bar,
                           cv_w,        kl_rollout_train, mean_abs_dp, clip_fraction, kl_ref};
  return std::all_of(std::begin(values), std::end(values), [](double v) { return std::isfinite(v); });
}

RectificationWeights rectification_weights(const GroupBatch& batch, CorrectionMode mode, double alpha, double c) {
  RectificationWeights out;
  out.reserve(batch.num_trajectories());
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      std::vector<double> w(traj.length(), 1.0);
      if (mode != CorrectionMode::kNone) {
        for (std::size_t t = 0; t < traj.length(); ++t) {
          const double w_bar = truncate(token_ratio(traj, t), c);
          w[t] = mode == CorrectionMode::kTis ? w_bar : rectification_weight(w_bar, alpha);
        }
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_range) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range) * advantage;
  SurrogateTerm term;
  if (clipped < unclipped) {
    term.value = clipped;
    term.dvalue_dlogp = 0.0;
    term.clipped = true;
  } else {
    term.value = unclipped;
    // d(rho * A) / d log pi = rho * A
    term.dvalue_dlogp = unclipped;
  }
  return term;
}

double categorical_kl(std::span<const double> logp, std::span<const double> logq) {
  double kl = 0.0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    kl += std::exp(logp[i]) * (logp[i] - logq[i]);
  }
  return kl;
}

namespace {

struct TrajectoryLoss {
  double objective = 0.0;
  double kl = 0.0;
  std::size_t clipped = 0;
  std::size_t tokens = 0;
};

}  // namespace

LossResult ais_grpo_loss(const GroupBatch& batch, const RectificationWeights& weights, const PolicyParams& theta,
                         const PolicyParams& reference, const LossSettings& settings) {
  batch.validate();
  if (weights.size() != batch.num_trajectories()) {
    throw std::invalid_argument(fmt::format("got {} weight rows for {} trajectories", weights.size(),
                                            batch.num_trajectories()));
  }
  const PolicyInstance current{theta, QuantSpec::full()};
  const PolicyInstance ref{reference, QuantSpec::full()};

  std::vector<const Trajectory*> trajectories;
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      trajectories.push_back(&traj);
    }
  }
  const double num_groups = static_cast<double>(batch.groups.size());
  const double group_size = static_cast<double>(batch.groups.front().members.size());

  std::vector<TrajectoryLoss> partial(trajectories.size());
  std::vector<PolicyParams> partial_grad(trajectories.size(), PolicyParams{theta.shape()});

  detail::parallel_for(trajectories.size(), settings.threads, [&](std::size_t n) {
    const Trajectory& traj = *trajectories[n];
    const auto& w = weights[n];
    if (w.size() != traj.length()) {
      throw std::invalid_argument("rectification weights do not match trajectory length");
    }
    if (traj.length() == 0) {
      return;
    }
    // Objective = sum over positions of coef * (w * surrogate - kl_coeff * KL);
    // the loss is its negation.
    const double coef = 1.0 / (num_groups * group_size * static_cast<double>(traj.length()));
    std::vector<int> context = traj.prompt;
    ForwardCache cache;
    TrajectoryLoss& out = partial[n];
    for (std::size_t t = 0; t < traj.length(); ++t) {
      const auto logp = log_softmax(current.forward(context, cache));
      const auto token = static_cast<std::size_t>(traj.completion[t]);
      const double ratio = std::exp(logp[token] - traj.logp_train[t]);
      const SurrogateTerm term = clipped_surrogate(ratio, traj.advantage, settings.clip_range);

      std::vector<double> dlogits(logp.size());
      // d/dz of w * surrogate: w * dS/dlogp * (onehot - p)
      const double g_token = w[t] * term.dvalue_dlogp;
      for (std::size_t v = 0; v < logp.size(); ++v) {
        dlogits[v] = -g_token * std::exp(logp[v]);
      }
      dlogits[token] += g_token;

      double kl = 0.0;
      if (settings.kl_coeff > 0.0) {
        const auto logr = ref.log_probs(context);
        kl = categorical_kl(logp, logr);
        // dKL/dz_j = p_j (log p_j - log r_j - KL)
        for (std::size_t v = 0; v < logp.size(); ++v) {
          dlogits[v] -= settings.kl_coeff * std::exp(logp[v]) * (logp[v] - logr[v] - kl);
        }
      }
      for (double& g : dlogits) {
        g *= -coef;
      }
      backward(theta, cache, dlogits, partial_grad[n]);

      out.objective += coef * (w[t] * term.value - settings.kl_coeff * kl);
      out.kl += kl;
      out.clipped += term.clipped ? 1 : 0;
      ++out.tokens;
      context.push_back(traj.completion[t]);
    }
  });

  LossResult result{0.0, PolicyParams{theta.shape()}, 0.0, 0.0};
  double objective = 0.0;
  double kl_total = 0.0;
  std::size_t clipped = 0;
  std::size_t tokens = 0;
  for (std::size_t n = 0; n < trajectories.size(); ++n) {
    objective += partial[n].objective;
    kl_total += partial[n].kl;
    clipped += partial[n].clipped;
    tokens += partial[n].tokens;
    result.grad.add_scaled(partial_grad[n], 1.0);
  }
  result.loss = -objective;
  result.clip_fraction = tokens > 0 ? static_cast<double>(clipped) / static_cast<double>(tokens) : 0.0;
  result.kl_ref = tokens > 0 ? kl_total / static_cast<double>(tokens) : 0.0;
  if (!std::isfinite(result.loss)) {
    throw NonFiniteError(fmt::format("non-finite loss {}", result.loss), -1);
  }
  return result;
}

double kl_rollout_train(const GroupBatch& batch, const PolicyInstance& full, const PolicyInstance& quantized) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      std::vector<int> context = traj.prompt;
      for (std::size_t t = 0; t < traj.length(); ++t) {
        total += categorical_kl(quantized.log_probs(context), full.log_probs(context));
        ++n;
        context.push_back(traj.completion[t]);
      }
    }
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

double mean_abs_dp(const GroupBatch& batch) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      for (std::size_t t = 0; t < traj.length(); ++t) {
        total += std::abs(std::exp(traj.logp_rollout[t]) - std::exp(traj.logp_train[t]));
        ++n;
      }
    }
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

double clip_grad_norm(PolicyParams& grad, double max_norm) {
  const double norm = std::sqrt(grad.squared_norm());
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad.values()) {
      g *= scale;
    }
  }
  return norm;
}

AdamW::AdamW(const PolicyShape& shape, double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_{lr}, beta1_{beta1}, beta2_{beta2}, eps_{eps}, weight_decay_{weight_decay}, m_{shape}, v_{shape} {}

void AdamW::step(PolicyParams& params, const PolicyParams& grad) {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.values();
  const auto g = grad.values();
  auto m = m_.values();
  auto v = v_.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] *= 1.0 - lr_ * weight_decay_;
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

Trainer::Trainer(TrainConfig cfg) : Trainer(cfg, init_params(cfg.policy, RngStream{cfg.seed}.child("init"))) {}

Trainer::Trainer(TrainConfig cfg, PolicyParams initial)
    : cfg_{std::move(cfg)},
      params_{std::move(initial)},
      reference_{params_},
      optimizer_{params_.shape(), cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps,
                 cfg_.weight_decay},
      root_{cfg_.seed},
      noise_key_{root_.child("logit_noise").key()} {
  cfg_.validate();
  if (params_.shape() != cfg_.policy) {
    throw std::invalid_argument("initial parameters do not match the configured policy shape");
  }
}

PolicyInstance Trainer::rollout_instance() const {
  return PolicyInstance{params_, cfg_.quant, LogitNoise{cfg_.logit_noise_std, noise_key_}};
}

PolicyInstance Trainer::train_instance() const { return PolicyInstance{params_, QuantSpec::full()}; }

GroupBatch Trainer::rollout_step(int step) const {
  const PolicyInstance rollout = rollout_instance();
  const PolicyInstance full = train_instance();
  const RngStream step_stream = root_.child("rollout").child(static_cast<std::uint64_t>(step));

  const auto num_prompts = static_cast<std::size_t>(cfg_.prompts_per_step);
  const auto g = static_cast<std::size_t>(cfg_.group_size);
  GroupBatch batch;
  batch.groups.resize(num_prompts);
  for (std::size_t p = 0; p < num_prompts; ++p) {
    RngStream prompt_rng = step_stream.child(p).child("prompt");
    const Prompt prompt = sample_prompt(cfg_.task, prompt_rng);
    batch.groups[p].truth = prompt.truth;
    batch.groups[p].members.resize(g);
    for (auto& traj : batch.groups[p].members) {
      traj.prompt = prompt.tokens;
    }
  }

  detail::parallel_for(num_prompts * g, cfg_.threads, [&](std::size_t n) {
    const std::size_t p = n / g;
    const std::size_t i = n % g;
    Trajectory& traj = batch.groups[p].members[i];
    RngStream member_rng = step_stream.child(p).child("member").child(i);
    SampledSequence sample = sample_sequence(rollout, traj.prompt, cfg_.task.answer_len(), member_rng);
    traj.completion = std::move(sample.tokens);
    traj.logp_rollout = std::move(sample.log_probs);
    traj.logp_train.resize(traj.completion.size());
    std::vector<int> context = traj.prompt;
    for (std::size_t t = 0; t < traj.completion.size(); ++t) {
      traj.logp_train[t] = full.log_prob(context, traj.completion[t]);
      context.push_back(traj.completion[t]);
    }
    traj.reward = reward(cfg_.task, traj.completion, batch.groups[p].truth);
  });

  for (auto& group : batch.groups) {
    std::vector<double> rewards;
    for (const auto& traj : group.members) {
      rewards.push_back(traj.reward);
    }
    const auto adv = group_advantage(rewards);
    for (std::size_t i = 0; i < group.members.size(); ++i) {
      group.members[i].advantage = adv[i];
    }
  }
  return batch;
}

StepMetrics Trainer::step() {
  const int step_index = step_;
  const GroupBatch batch = rollout_step(step_index);
  const AlphaSignals signals = compute_signals(batch, cfg_.ais);

  double alpha = 0.0;
  switch (cfg_.correction) {
    case CorrectionMode::kNone:
      alpha = 0.0;
      break;
    case CorrectionMode::kTis:
      alpha = 1.0;
      break;
    case CorrectionMode::kAis:
      alpha = cfg_.alpha_override.value_or(signals.alpha);
      break;
  }
  const RectificationWeights weights = rectification_weights(batch, cfg_.correction, alpha, cfg_.ais.c);

  LossResult loss = [&] {
    try {
      return ais_grpo_loss(batch, weights, params_, reference_,
                           LossSettings{cfg_.clip_range, cfg_.kl_coeff, cfg_.threads});
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(e.what(), step_index);
    }
  }();
  if (!loss.grad.all_finite()) {
    throw NonFiniteError("non-finite gradient", step_index);
  }

  StepMetrics m;
  m.step = step_index;
  double reward_total = 0.0;
  for (const auto& group : batch.groups) {
    for (const auto& traj : group.members) {
      reward_total += traj.reward;
    }
  }
  m.mean_reward = reward_total / static_cast<double>(batch.num_trajectories());
  m.loss = loss.loss;
  m.alpha = alpha;
  m.alpha_gate = signals.alpha;
  m.alpha_ess = signals.alpha_ess;
  m.alpha_mis = signals.alpha_mis;
  m.alpha_var = signals.alpha_var;
  m.d_bar = signals.d_bar;
  m.delta_sigma = signals.delta_sigma;
  m.ess_ratio = signals.ess_ratio;
  m.cv_w_bar = signals.cv_w;
  std::vector<double> applied;
  for (const auto& row : weights) {
    applied.insert(applied.end(), row.begin(), row.end());
  }
  m.cv_w = alpha_ess(applied).cv;
  m.kl_rollout_train = kl_rollout_train(batch, train_instance(), rollout_instance());
  m.mean_abs_dp = mean_abs_dp(batch);
  m.clip_fraction = loss.clip_fraction;
  m.kl_ref = loss.kl_ref;

  m.grad_norm = clip_grad_norm(loss.grad, cfg_.grad_clip);
  optimizer_.step(params_, loss.grad);
  if (!params_.all_finite()) {
    throw NonFiniteError("non-finite parameters after update", step_index);
  }
  if (!m.all_finite()) {
    throw NonFiniteError("non-finite step metrics", step_index);
  }
  ++step_;
  return m;
}

TrainResult train(const TrainConfig& cfg, const std::function<void(const StepMetrics&)>& on_step) {
  Trainer trainer{cfg};
  TrainResult result{{}, trainer.params()};
  result.metrics.reserve(static_cast<std::size_t>(cfg.total_steps));
  for (int s = 0; s < cfg.total_steps; ++s) {
    result.metrics.push_back(trainer.step());
    if (on_step) {
      on_step(result.metrics.back());
    }
  }
  result.final_params = trainer.params();
  return result;
}

}  // namespace aisrl
