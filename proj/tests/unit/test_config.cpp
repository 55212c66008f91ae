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

#include <filesystem>
#include <fstream>
#include <string>

#include "aisrl/config.hpp"

namespace {

using nlohmann::json;

std::string error_of(const json& doc) {
  try {
    (void)aisrl::config_from_json(doc);
  } catch (const aisrl::ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto cfg = aisrl::config_from_json(json::object());
  const aisrl::TrainConfig defaults;
  EXPECT_EQ(cfg.ais.c, 5.0);
  EXPECT_EQ(cfg.ais.delta, 0.02);
  EXPECT_EQ(cfg.ais.gamma, 1.2);
  EXPECT_EQ(cfg.ais.eps, 1e-6);
  EXPECT_EQ(cfg.ais.beta_var, 1.0);
  EXPECT_EQ(cfg.total_steps, defaults.total_steps);
  EXPECT_EQ(cfg.quant.kind, aisrl::QuantKind::kE4M3);
}

TEST(Config, RoundTripsThroughJson) {
  json doc = json::object();
  doc["trainer"] = {{"seed", 12}, {"alpha_override", 0.25}, {"correction_mode", "tis"}, {"threads", 2}};
  doc["quant"] = {{"kind", "intb"}, {"bits", 6}, {"quantize_activations", true}};
  doc["task"] = {{"kind", "parity"}, {"num_bits", 3}};
  const auto cfg = aisrl::config_from_json(doc);
  const auto resolved = aisrl::config_to_json(cfg);
  EXPECT_EQ(aisrl::config_to_json(aisrl::config_from_json(resolved)), resolved);
  EXPECT_EQ(resolved["trainer"]["seed"], 12);
  EXPECT_EQ(resolved["quant"]["bits"], 6);
  EXPECT_EQ(resolved["trainer"]["correction_mode"], "tis");
  EXPECT_EQ(resolved["trainer"]["kl_estimator"], "exact_per_position");
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_NE(error_of(json{{"trainer", {{"stepz", 3}}}}).find("trainer.stepz"), std::string::npos);
  EXPECT_NE(error_of(json{{"optim", json::object()}}).find("optim"), std::string::npos);
}

TEST(Config, TypeErrorsNameTheField) {
  EXPECT_NE(error_of(json{{"ais", {{"c", "five"}}}}).find("ais.c"), std::string::npos);
  EXPECT_NE(error_of(json{{"trainer", {{"group_size", 2.5}}}}).find("trainer.group_size"), std::string::npos);
  EXPECT_NE(error_of(json{{"trainer", {{"seed", -1}}}}).find("trainer.seed"), std::string::npos);
  EXPECT_NE(error_of(json{{"quant", {{"kind", "fp4"}}}}).find("quant.kind"), std::string::npos);
}

TEST(Config, ValidationErrorsNameTheField) {
  EXPECT_NE(error_of(json{{"trainer", {{"group_size", 1}}}}).find("group_size"), std::string::npos);
  EXPECT_NE(error_of(json{{"ais", {{"c", 0.5}}}}).find("c"), std::string::npos);
}

TEST(Config, OverridesParseValues) {
  json doc = json::object();
  aisrl::apply_override_flag(doc, "--quant.kind=e4m3");
  aisrl::apply_override_flag(doc, "--ais.c=2.5");
  aisrl::apply_override_flag(doc, "--trainer.total_steps=7");
  aisrl::apply_override_flag(doc, "--quant.quantize_activations=true");
  const auto cfg = aisrl::config_from_json(doc);
  EXPECT_EQ(cfg.quant.kind, aisrl::QuantKind::kE4M3);
  EXPECT_EQ(cfg.ais.c, 2.5);
  EXPECT_EQ(cfg.total_steps, 7);
  EXPECT_TRUE(cfg.quant.quantize_activations);
  EXPECT_THROW(aisrl::apply_override_flag(doc, "--trainer"), aisrl::ConfigError);
  EXPECT_THROW(aisrl::apply_override_flag(doc, "--seed=3"), aisrl::ConfigError);
  EXPECT_THROW(aisrl::apply_override_flag(doc, "trainer.seed=3"), aisrl::ConfigError);
}

TEST(Config, MissingFileNamesPath) {
  try {
    (void)aisrl::read_config_document("/nonexistent/aisrl.json");
    FAIL() << "expected an exception";
  } catch (const aisrl::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/aisrl.json"), std::string::npos);
  }
}

TEST(Config, MalformedFileIsRejected) {
  const auto path = std::filesystem::temp_directory_path() / "aisrl_bad_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW((void)aisrl::read_config_document(path), aisrl::ConfigError);
  std::filesystem::remove(path);
}

TEST(Metrics, KeysAreExactlyTheFieldNames) {
  const auto j = aisrl::metrics_to_json(aisrl::StepMetrics{});
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) {
    keys.push_back(k);
  }
  const std::vector<std::string> expected{"step",        "mean_reward", "loss",          "grad_norm",
                                          "alpha",       "alpha_gate",  "alpha_ess",     "alpha_mis",
                                          "alpha_var",   "d_bar",       "delta_sigma",   "ess_ratio",
                                          "cv_w_bar",    "cv_w",        "kl_rollout_train", "mean_abs_dp",
                                          "clip_fraction", "kl_ref"};
  EXPECT_EQ(keys, expected);
}

TEST(Metrics, NumbersRoundTripExactly) {
  aisrl::StepMetrics m;
  m.loss = 0.1 + 0.2;
  m.alpha = 1.0 / 3.0;
  const auto back = json::parse(aisrl::metrics_line(m));
  EXPECT_EQ(back["loss"].get<double>(), m.loss);
  EXPECT_EQ(back["alpha"].get<double>(), m.alpha);
}

}  // namespace
