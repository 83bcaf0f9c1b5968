// Copyright 2026 The SynergyNet Authors. All Rights Reserved.
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

// JSON encodings of the configuration types. Decoding is strict: unknown
// keys and wrongly typed values raise ConfigError. Missing keys keep their
// defaults.

#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "synergy/segnet.hpp"
#include "synergy/synth.hpp"

namespace synergy {

using Json = nlohmann::json;

/// Throws ConfigError naming the first key of `object` not in `allowed`.
void require_known_keys(const Json& object, std::initializer_list<const char*> allowed, const std::string& context);

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

Json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const Json& j);

/// Parses a JSON file; ConfigError with the path on I/O or syntax errors.
Json read_json_file(const std::filesystem::path& path);
/// Writes j.dump(2) plus a newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace synergy
