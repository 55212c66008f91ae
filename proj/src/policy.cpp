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

#include "aisrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace aisrl {

void PolicyShape::validate() const {
  if (vocab_size < 2 || vocab_size > 64) {
    throw std::invalid_argument(fmt::format("vocab_size must be in [2, 64], got {}", vocab_size));
  }
  if (context_width < 1) {
    throw std::invalid_argument(fmt::format("context_width must be >= 1, got {}", context_width));
  }
  if (embed_dim < 1) {
    throw std::invalid_argument(fmt::format("embed_dim must be >= 1, got {}", embed_dim));
  }
  if (hidden_dim < 1) {
    throw std::invalid_argument(fmt::format("hidden_dim must be >= 1, got {}", hidden_dim));
  }
}

std::string_view block_name(Block block) noexcept {
  switch (block) {
    case Block::kEmbedding:
      return "embedding";
    case Block::kHiddenWeight:
      return "hidden_weight";
    case Block::kHiddenBias:
      return "hidden_bias";
    case Block::kHeadWeight:
      return "head_weight";
    case Block::kHeadBias:
      return "head_bias";
  }
  return "unknown";
}

PolicyParams::PolicyParams(const PolicyShape& shape) : shape_{shape} {
  shape_.validate();
  const auto v = static_cast<std::size_t>(shape.vocab_size);
  const auto k = static_cast<std::size_t>(shape.context_width);
  const auto d = static_cast<std::size_t>(shape.embed_dim);
  const auto h = static_cast<std::size_t>(shape.hidden_dim);
  const std::array<std::size_t, kNumBlocks> sizes = {(v + 1) * d, h * k * d, h, v * h, v};
  offsets_[0] = 0;
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    offsets_[i + 1] = offsets_[i] + sizes[i];
  }
  values_.assign(offsets_[kNumBlocks], 0.0);
}

std::span<double> PolicyParams::block(Block b) noexcept {
  const auto i = static_cast<std::size_t>(b);
  return std::span<double>{values_}.subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::span<const double> PolicyParams::block(Block b) const noexcept {
  const auto i = static_cast<std::size_t>(b);
  return std::span<const double>{values_}.subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::vector<std::size_t> PolicyParams::block_shape(Block b) const {
  const auto v = static_cast<std::size_t>(shape_.vocab_size);
  const auto k = static_cast<std::size_t>(shape_.context_width);
  const auto d = static_cast<std::size_t>(shape_.embed_dim);
  const auto h = static_cast<std::size_t>(shape_.hidden_dim);
  switch (b) {
    case Block::kEmbedding:
      return {v + 1, d};
    case Block::kHiddenWeight:
      return {h, k * d};
    case Block::kHiddenBias:
      return {h};
    case Block::kHeadWeight:
      return {v, h};
    case Block::kHeadBias:
      return {v};
  }
  return {};
}

void PolicyParams::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

void PolicyParams::add_scaled(const PolicyParams& other, double scale) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("add_scaled: parameter shapes differ");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] += scale * other.values_[i];
  }
}

double PolicyParams::squared_norm() const noexcept {
  double total = 0.0;
  for (const double v : values_) {
    total += v * v;
  }
  return total;
}

bool PolicyParams::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

PolicyParams init_params(const PolicyShape& shape, RngStream rng) {
  PolicyParams params{shape};
  auto fill_gaussian = [&](Block b, double stddev) {
    auto stream = rng.child(block_name(b));
    for (double& v : params.block(b)) {
      v = stream.normal(0.0, stddev);
    }
  };
  fill_gaussian(Block::kEmbedding, 1.0);
  fill_gaussian(Block::kHiddenWeight, 1.0 / std::sqrt(static_cast<double>(shape.context_width * shape.embed_dim)));
  fill_gaussian(Block::kHeadWeight, 1.0 / std::sqrt(static_cast<double>(shape.hidden_dim)));
  return params;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (const double z : logits) {
    total += std::exp(z - max_logit);
  }
  const double log_norm = max_logit + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] - log_norm;
  }
  return out;
}

namespace {

void fill_window(const PolicyShape& shape, std::span<const int> context, std::vector<int>& window) {
  const auto k = static_cast<std::size_t>(shape.context_width);
  window.assign(k, shape.pad_token());
  for (const int token : context) {
    if (token < 0 || token >= shape.vocab_size) {
      throw std::out_of_range(fmt::format("token id {} outside vocabulary [0, {})", token, shape.vocab_size));
    }
  }
  const std::size_t used = std::min(k, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(used), context.end(),
            window.end() - static_cast<std::ptrdiff_t>(used));
}

// `activations` is null when only weights are projected.
std::vector<double> run_forward(const PolicyParams& w, std::span<const int> context, const QuantSpec* activations,
                                const LogitNoise& noise, ForwardCache& cache) {
  const PolicyShape& shape = w.shape();
  const auto v = static_cast<std::size_t>(shape.vocab_size);
  const auto k = static_cast<std::size_t>(shape.context_width);
  const auto d = static_cast<std::size_t>(shape.embed_dim);
  const auto h = static_cast<std::size_t>(shape.hidden_dim);

  fill_window(shape, context, cache.window);

  const auto embedding = w.block(Block::kEmbedding);
  cache.input.resize(k * d);
  for (std::size_t slot = 0; slot < k; ++slot) {
    const auto row = static_cast<std::size_t>(cache.window[slot]);
    std::copy_n(embedding.begin() + static_cast<std::ptrdiff_t>(row * d), d,
                cache.input.begin() + static_cast<std::ptrdiff_t>(slot * d));
  }

  const auto w1 = w.block(Block::kHiddenWeight);
  const auto b1 = w.block(Block::kHiddenBias);
  cache.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    double acc = b1[j];
    const auto* row = &w1[j * k * d];
    for (std::size_t i = 0; i < k * d; ++i) {
      acc += row[i] * cache.input[i];
    }
    cache.hidden[j] = acc;
  }
  if (activations != nullptr) {
    project_inplace(cache.hidden, *activations);
  }
  for (double& x : cache.hidden) {
    x = std::tanh(x);
  }

  const auto w2 = w.block(Block::kHeadWeight);
  const auto b2 = w.block(Block::kHeadBias);
  cache.logits.resize(v);
  for (std::size_t o = 0; o < v; ++o) {
    double acc = b2[o];
    const auto* row = &w2[o * h];
    for (std::size_t j = 0; j < h; ++j) {
      acc += row[j] * cache.hidden[j];
    }
    cache.logits[o] = acc;
  }
  if (activations != nullptr) {
    project_inplace(cache.logits, *activations);
  }
  if (noise.stddev > 0.0) {
    RngStream stream{hash_tokens(noise.key, cache.window)};
    for (double& z : cache.logits) {
      z += stream.normal(0.0, noise.stddev);
    }
  }
  return cache.logits;
}

}  // namespace

PolicyInstance::PolicyInstance(const PolicyParams& params, const QuantSpec& spec, LogitNoise noise)
    : weights_{params}, spec_{spec}, noise_{noise} {
  spec_.validate();
  if (spec_.kind != QuantKind::kFull) {
    for (const Block b : kAllBlocks) {
      project_inplace(weights_.block(b), spec_);
    }
  }
}

std::vector<double> PolicyInstance::forward(std::span<const int> context, ForwardCache& cache) const {
  const QuantSpec* activations =
      (spec_.quantize_activations && spec_.kind != QuantKind::kFull) ? &spec_ : nullptr;
  return run_forward(weights_, context, activations, noise_, cache);
}

std::vector<double> PolicyInstance::logits(std::span<const int> context) const {
  ForwardCache cache;
  return forward(context, cache);
}

std::vector<double> PolicyInstance::log_probs(std::span<const int> context) const {
  return log_softmax(logits(context));
}

double PolicyInstance::log_prob(std::span<const int> context, int token) const {
  if (token < 0 || token >= vocab_size()) {
    throw std::out_of_range(fmt::format("token id {} outside vocabulary [0, {})", token, vocab_size()));
  }
  return log_probs(context)[static_cast<std::size_t>(token)];
}

SampledSequence sample_sequence(const PolicyInstance& inst, std::span<const int> prompt, int horizon, RngStream& rng) {
  if (horizon < 1) {
    throw std::invalid_argument(fmt::format("horizon must be >= 1, got {}", horizon));
  }
  std::vector<int> context(prompt.begin(), prompt.end());
  SampledSequence out;
  out.tokens.reserve(static_cast<std::size_t>(horizon));
  out.log_probs.reserve(static_cast<std::size_t>(horizon));
  std::vector<double> probs(static_cast<std::size_t>(inst.vocab_size()));
  for (int t = 0; t < horizon; ++t) {
    const auto logp = inst.log_probs(context);
    std::transform(logp.begin(), logp.end(), probs.begin(), [](double lp) { return std::exp(lp); });
    const auto token = static_cast<int>(rng.categorical(probs));
    out.tokens.push_back(token);
    out.log_probs.push_back(logp[static_cast<std::size_t>(token)]);
    context.push_back(token);
  }
  return out;
}

std::vector<int> greedy_sequence(const PolicyInstance& inst, std::span<const int> prompt, int horizon) {
  std::vector<int> context(prompt.begin(), prompt.end());
  std::vector<int> out;
  for (int t = 0; t < horizon; ++t) {
    const auto z = inst.logits(context);
    const auto token = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    out.push_back(token);
    context.push_back(token);
  }
  return out;
}

void backward(const PolicyParams& params, const ForwardCache& cache, std::span<const double> dlogits,
              PolicyParams& grad) {
  const PolicyShape& shape = params.shape();
  const auto v = static_cast<std::size_t>(shape.vocab_size);
  const auto k = static_cast<std::size_t>(shape.context_width);
  const auto d = static_cast<std::size_t>(shape.embed_dim);
  const auto h = static_cast<std::size_t>(shape.hidden_dim);

  auto g_b2 = grad.block(Block::kHeadBias);
  auto g_w2 = grad.block(Block::kHeadWeight);
  const auto w2 = params.block(Block::kHeadWeight);
  std::vector<double> dhidden(h, 0.0);
  for (std::size_t o = 0; o < v; ++o) {
    const double g = dlogits[o];
    if (g == 0.0) {
      continue;
    }
    g_b2[o] += g;
    for (std::size_t j = 0; j < h; ++j) {
      g_w2[o * h + j] += g * cache.hidden[j];
      dhidden[j] += g * w2[o * h + j];
    }
  }

  // tanh'(x) = 1 - tanh(x)^2
  auto g_b1 = grad.block(Block::kHiddenBias);
  auto g_w1 = grad.block(Block::kHiddenWeight);
  const auto w1 = params.block(Block::kHiddenWeight);
  std::vector<double> dinput(k * d, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double dpre = dhidden[j] * (1.0 - cache.hidden[j] * cache.hidden[j]);
    if (dpre == 0.0) {
      continue;
    }
    g_b1[j] += dpre;
    for (std::size_t i = 0; i < k * d; ++i) {
      g_w1[j * k * d + i] += dpre * cache.input[i];
      dinput[i] += dpre * w1[j * k * d + i];
    }
  }

  auto g_emb = grad.block(Block::kEmbedding);
  for (std::size_t slot = 0; slot < k; ++slot) {
    const auto row = static_cast<std::size_t>(cache.window[slot]);
    for (std::size_t c = 0; c < d; ++c) {
      g_emb[row * d + c] += dinput[slot * d + c];
    }
  }
}

PolicyParams grad_log_prob(const PolicyParams& params, std::span<const int> context, int token) {
  const PolicyInstance inst{params, QuantSpec::full()};
  if (token < 0 || token >= inst.vocab_size()) {
    throw std::out_of_range(fmt::format("token id {} outside vocabulary [0, {})", token, inst.vocab_size()));
  }
  ForwardCache cache;
  const auto logp = log_softmax(inst.forward(context, cache));
  std::vector<double> dlogits(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) {
    dlogits[i] = -std::exp(logp[i]);
  }
  dlogits[static_cast<std::size_t>(token)] += 1.0;
  PolicyParams grad{params.shape()};
  backward(params, cache, dlogits, grad);
  return grad;
}

}  // namespace aisrl
