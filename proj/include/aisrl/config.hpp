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

#ifndef AISRL_CONFIG_HPP
#define AISRL_CONFIG_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "aisrl/trainer.hpp"

/**
 * \file
 * \brief Experiment configuration documents and metrics serialization.
 *
 * A config is a JSON object with optional sections `task`, `quant`, `ais` and
 * `trainer`. Every field is optional; absent fields take the TrainConfig
 * defaults. Unknown sections or keys are rejected.
 */

namespace aisrl {

/// Malformed, unreadable or invalid configuration. The message names the
/// offending field or path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds and validates a TrainConfig from a config document.
TrainConfig config_from_json(const nlohmann::json& doc);

/// Fully resolved config document; round-trips through config_from_json.
nlohmann::json config_to_json(const TrainConfig& cfg);

/// Reads a config document from disk. Throws ConfigError naming the path if
/// the file is missing or does not parse.
nlohmann::json read_config_document(const std::filesystem::path& path);

/// Sets `section.key` in `doc` to `value`. The value is parsed as JSON when
/// possible and taken as a plain string otherwise.
void apply_override(nlohmann::json& doc, std::string_view dotted_key, std::string_view value);

/// Parses a `--section.key=value` flag and applies it. Throws ConfigError on a
/// malformed flag.
void apply_override_flag(nlohmann::json& doc, std::string_view flag);

/// One metrics record with keys exactly the StepMetrics field names, in
/// declaration order.
nlohmann::ordered_json metrics_to_json(const StepMetrics& metrics);

/// Compact single-line form of metrics_to_json, without a trailing newline.
std::string metrics_line(const StepMetrics& metrics);

}  // namespace aisrl

#endif  // AISRL_CONFIG_HPP
