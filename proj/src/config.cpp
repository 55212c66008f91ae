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

#include "aisrl/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <limits>
#include <string>

#include <fmt/format.h>

namespace aisrl {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& doc, std::string name) : name_{std::move(name)} {
    if (doc.contains(name_)) {
      node_ = &doc.at(name_);
      if (!node_->is_object()) {
        throw ConfigError(fmt::format("section '{}' must be an object", name_));
      }
    }
  }

  void read(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) {
        throw type_error(key, "a number");
      }
      out = v->get<double>();
    }
  }

  void read(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) {
        throw type_error(key, "an integer");
      }
      const auto wide = v->get<long long>();
      if (v->is_number_unsigned() && v->get<unsigned long long>() > static_cast<unsigned long long>(std::numeric_limits<int>::max())) {
        throw type_error(key, "an integer in int range");
      }
      if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) {
        throw type_error(key, "an integer in int range");
      }
      out = static_cast<int>(wide);
    }
  }

  void read(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      const bool non_negative =
          v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0);
      if (!non_negative) {
        throw type_error(key, "a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void read(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) {
        throw type_error(key, "a boolean");
      }
      out = v->get<bool>();
    }
  }

  void read(const char* key, std::optional<double>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw type_error(key, "a number or null");
      }
    }
  }

  template <class Parse>
  void read_enum(const char* key, Parse&& parse) {
    if (const json* v = take(key)) {
      if (!v->is_string()) {
        throw type_error(key, "a string");
      }
      try {
        parse(v->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("{}.{}: {}", name_, key, e.what()));
      }
    }
  }

  void finish() const {
    if (node_ == nullptr) {
      return;
    }
    for (const auto& [key, value] : node_->items()) {
      if (consumed_.find(key) == consumed_.end()) {
        throw ConfigError(fmt::format("unknown key '{}.{}'", name_, key));
      }
    }
  }

 private:
  const json* take(const char* key) {
    consumed_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) {
      return nullptr;
    }
    return &node_->at(key);
  }

  ConfigError type_error(const char* key, const char* expected) const {
    return ConfigError(fmt::format("{}.{} must be {}", name_, key, expected));
  }

  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string, std::less<>> consumed_;
};

}  // namespace

TrainConfig config_from_json(const json& doc) {
  if (!doc.is_object()) {
    throw ConfigError("config document must be a JSON object");
  }
  for (const auto& [key, value] : doc.items()) {
    if (key != "task" && key != "quant" && key != "ais" && key != "trainer") {
      throw ConfigError(fmt::format("unknown section '{}'", key));
    }
  }

  TrainConfig cfg;

  Section task(doc, "task");
  task.read_enum("kind", [&](const std::string& s) { cfg.task.kind = parse_task_kind(s); });
  task.read("num_terms", cfg.task.num_terms);
  task.read("modulus", cfg.task.modulus);
  task.read("num_bits", cfg.task.num_bits);
  task.read("format_weight", cfg.task.format_weight);
  task.read("correct_weight", cfg.task.correct_weight);
  task.finish();

  Section quant(doc, "quant");
  quant.read_enum("kind", [&](const std::string& s) { cfg.quant.kind = parse_quant_kind(s); });
  quant.read("bits", cfg.quant.bits);
  quant.read("quantize_activations", cfg.quant.quantize_activations);
  quant.finish();

  Section ais(doc, "ais");
  ais.read("c", cfg.ais.c);
  ais.read("delta", cfg.ais.delta);
  ais.read("gamma", cfg.ais.gamma);
  ais.read("beta_var", cfg.ais.beta_var);
  ais.read("eps", cfg.ais.eps);
  ais.finish();

  Section tr(doc, "trainer");
  tr.read_enum("correction_mode", [&](const std::string& s) { cfg.correction = parse_correction_mode(s); });
  tr.read_enum("kl_estimator", [](const std::string& s) {
    if (s != "exact_per_position") {
      throw std::invalid_argument(fmt::format("unknown KL estimator '{}' (expected exact_per_position)", s));
    }
  });
  tr.read("group_size", cfg.group_size);
  tr.read("prompts_per_step", cfg.prompts_per_step);
  tr.read("horizon", cfg.horizon);
  tr.read("clip_range", cfg.clip_range);
  tr.read("kl_coeff", cfg.kl_coeff);
  tr.read("learning_rate", cfg.learning_rate);
  tr.read("adam_beta1", cfg.adam_beta1);
  tr.read("adam_beta2", cfg.adam_beta2);
  tr.read("adam_eps", cfg.adam_eps);
  tr.read("weight_decay", cfg.weight_decay);
  tr.read("grad_clip", cfg.grad_clip);
  tr.read("total_steps", cfg.total_steps);
  tr.read("seed", cfg.seed);
  tr.read("logit_noise_std", cfg.logit_noise_std);
  tr.read("threads", cfg.threads);
  tr.read("alpha_override", cfg.alpha_override);
  tr.read("vocab_size", cfg.policy.vocab_size);
  tr.read("context_width", cfg.policy.context_width);
  tr.read("embed_dim", cfg.policy.embed_dim);
  tr.read("hidden_dim", cfg.policy.hidden_dim);
  tr.finish();

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json config_to_json(const TrainConfig& cfg) {
  json doc;
  doc["task"] = {
      {"kind", std::string(to_string(cfg.task.kind))},
      {"num_terms", cfg.task.num_terms},
      {"modulus", cfg.task.modulus},
      {"num_bits", cfg.task.num_bits},
      {"format_weight", cfg.task.format_weight},
      {"correct_weight", cfg.task.correct_weight},
  };
  doc["quant"] = {
      {"kind", std::string(to_string(cfg.quant.kind))},
      {"bits", cfg.quant.bits},
      {"quantize_activations", cfg.quant.quantize_activations},
  };
  doc["ais"] = {
      {"c", cfg.ais.c},
      {"delta", cfg.ais.delta},
      {"gamma", cfg.ais.gamma},
      {"beta_var", cfg.ais.beta_var},
      {"eps", cfg.ais.eps},
  };
  doc["trainer"] = {
      {"correction_mode", std::string(to_string(cfg.correction))},
      {"kl_estimator", "exact_per_position"},
      {"group_size", cfg.group_size},
      {"prompts_per_step", cfg.prompts_per_step},
      {"horizon", cfg.horizon},
      {"clip_range", cfg.clip_range},
      {"kl_coeff", cfg.kl_coeff},
      {"learning_rate", cfg.learning_rate},
      {"adam_beta1", cfg.adam_beta1},
      {"adam_beta2", cfg.adam_beta2},
      {"adam_eps", cfg.adam_eps},
      {"weight_decay", cfg.weight_decay},
      {"grad_clip", cfg.grad_clip},
      {"total_steps", cfg.total_steps},
      {"seed", cfg.seed},
      {"logit_noise_std", cfg.logit_noise_std},
      {"threads", cfg.threads},
      {"alpha_override", cfg.alpha_override ? json(*cfg.alpha_override) : json(nullptr)},
      {"vocab_size", cfg.policy.vocab_size},
      {"context_width", cfg.policy.context_width},
      {"embed_dim", cfg.policy.embed_dim},
      {"hidden_dim", cfg.policy.hidden_dim},
  };
  return doc;
}

json read_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config file '{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

void apply_override(json& doc, std::string_view dotted_key, std::string_view value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == dotted_key.size() ||
      dotted_key.find('.', dot + 1) != std::string_view::npos) {
    throw ConfigError(fmt::format("override key '{}' must have the form section.key", dotted_key));
  }
  const std::string section(dotted_key.substr(0, dot));
  const std::string key(dotted_key.substr(dot + 1));
  json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    parsed = std::string(value);
  }
  if (!doc.is_object()) {
    doc = json::object();
  }
  if (!doc.contains(section)) {
    doc[section] = json::object();
  }
  doc[section][key] = std::move(parsed);
}

void apply_override_flag(json& doc, std::string_view flag) {
  if (flag.substr(0, 2) != "--") {
    throw ConfigError(fmt::format("unexpected argument '{}'", flag));
  }
  flag.remove_prefix(2);
  const auto eq = flag.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(fmt::format("override '--{}' needs a value (--section.key=value)", flag));
  }
  apply_override(doc, flag.substr(0, eq), flag.substr(eq + 1));
}

nlohmann::ordered_json metrics_to_json(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["mean_reward"] = m.mean_reward;
  j["loss"] = m.loss;
  j["grad_norm"] = m.grad_norm;
  j["alpha"] = m.alpha;
  j["alpha_gate"] = m.alpha_gate;
  j["alpha_ess"] = m.alpha_ess;
  j["alpha_mis"] = m.alpha_mis;
  j["alpha_var"] = m.alpha_var;
  j["d_bar"] = m.d_bar;
  j["delta_sigma"] = m.delta_sigma;
  j["ess_ratio"] = m.ess_ratio;
  j["cv_w_bar"] = m.cv_w_bar;
  j["cv_w"] = m.cv_w;
  j["kl_rollout_train"] = m.kl_rollout_train;
  j["mean_abs_dp"] = m.mean_abs_dp;
  j["clip_fraction"] = m.clip_fraction;
  j["kl_ref"] = m.kl_ref;
  return j;
}

std::string metrics_line(const StepMetrics& metrics) { return metrics_to_json(metrics).dump(); }

}  // namespace aisrl
