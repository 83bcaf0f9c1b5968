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

#include "synergy/config.hpp"

#include <algorithm>
#include <fstream>

#include "synergy/errors.hpp"

namespace synergy {

void require_known_keys(const Json& object, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!object.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (const auto& item : object.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) {
      std::string list;
      for (const char* k : allowed) list += std::string(list.empty() ? "" : ", ") + k;
      throw ConfigError(context + ": unknown key \"" + item.key() + "\" (allowed: " + list + ")");
    }
  }
}

namespace {

void read(const Json& j, const char* key, std::size_t& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(ctx + "." + key + ": expected a non-negative integer");
  out = v.get<std::size_t>();
}

void read(const Json& j, const char* key, double& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(ctx + "." + key + ": expected a number");
  out = v.get<double>();
}

void read(const Json& j, const char* key, bool& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(ctx + "." + key + ": expected true or false");
  out = v.get<bool>();
}

void read(const Json& j, const char* key, std::vector<std::size_t>& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError(ctx + "." + key + ": expected an array of integers");
  out.clear();
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) throw ConfigError(ctx + "." + key + ": expected an array of non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
}

}  // namespace

Json to_json(const ModelConfig& c) {
  return Json{{"in_channels", c.in_channels},
              {"num_classes", c.num_classes},
              {"encoder_channels", c.encoder_channels},
              {"dim", c.dim},
              {"K", c.codebook_size},
              {"h_s", c.cross_heads},
              {"h_h", c.refine_heads},
              {"use_skips", c.use_skips},
              {"use_disconx", c.use_disconx},
              {"beta", c.beta},
              {"quant_weight", c.quant_weight},
              {"hard_temperature", c.hard_temperature},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const Json& j) {
  const std::string ctx = "model";
  require_known_keys(j,
                     {"in_channels", "num_classes", "encoder_channels", "dim", "K", "h_s", "h_h", "use_skips",
                      "use_disconx", "beta", "quant_weight", "hard_temperature", "seed"},
                     ctx);
  ModelConfig c;
  read(j, "in_channels", c.in_channels, ctx);
  read(j, "num_classes", c.num_classes, ctx);
  read(j, "encoder_channels", c.encoder_channels, ctx);
  read(j, "dim", c.dim, ctx);
  read(j, "K", c.codebook_size, ctx);
  read(j, "h_s", c.cross_heads, ctx);
  read(j, "h_h", c.refine_heads, ctx);
  read(j, "use_skips", c.use_skips, ctx);
  read(j, "use_disconx", c.use_disconx, ctx);
  read(j, "beta", c.beta, ctx);
  read(j, "quant_weight", c.quant_weight, ctx);
  read(j, "hard_temperature", c.hard_temperature, ctx);
  std::size_t seed = c.seed;
  read(j, "seed", seed, ctx);
  c.seed = seed;
  c.validate();
  return c;
}

Json to_json(const SynthSpec& s) {
  Json kinds = Json::array();
  for (auto k : s.kinds) kinds.push_back(to_string(k));
  return Json{{"image_size", s.image_size},
              {"num_classes", s.num_classes},
              {"min_shapes", s.min_shapes},
              {"max_shapes", s.max_shapes},
              {"noise_std", s.noise_std},
              {"min_radius", s.min_radius},
              {"max_radius", s.max_radius},
              {"overlap_allowed", s.overlap_allowed},
              {"count", s.count},
              {"seed", s.seed},
              {"kinds", kinds}};
}

SynthSpec synth_spec_from_json(const Json& j) {
  const std::string ctx = "spec";
  require_known_keys(j,
                     {"image_size", "num_classes", "min_shapes", "max_shapes", "noise_std", "min_radius",
                      "max_radius", "overlap_allowed", "count", "seed", "kinds"},
                     ctx);
  SynthSpec s;
  read(j, "image_size", s.image_size, ctx);
  read(j, "num_classes", s.num_classes, ctx);
  read(j, "min_shapes", s.min_shapes, ctx);
  read(j, "max_shapes", s.max_shapes, ctx);
  read(j, "noise_std", s.noise_std, ctx);
  read(j, "min_radius", s.min_radius, ctx);
  read(j, "max_radius", s.max_radius, ctx);
  read(j, "overlap_allowed", s.overlap_allowed, ctx);
  read(j, "count", s.count, ctx);
  std::size_t seed = s.seed;
  read(j, "seed", seed, ctx);
  s.seed = seed;
  if (j.contains("kinds")) {
    const auto& v = j.at("kinds");
    if (!v.is_array()) throw ConfigError("spec.kinds: expected an array of shape names");
    s.kinds.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError("spec.kinds: expected an array of shape names");
      s.kinds.push_back(parse_shape_kind(e.get<std::string>()));
    }
  }
  s.validate();
  return s;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IntegrityError(path.string() + ": write failed");
}

}  // namespace synergy
