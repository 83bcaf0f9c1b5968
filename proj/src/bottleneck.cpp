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

#include "synergy/bottleneck.hpp"

#include <limits>

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

void BottleneckConfig::validate() const {
  if (dim == 0) throw ConfigError("bottleneck dim must be positive");
  if (use_disconx && (cross_heads == 0 || dim % cross_heads != 0)) {
    throw ConfigError("cross-attention heads (" + std::to_string(cross_heads) + ") must divide dim (" +
                      std::to_string(dim) + ")");
  }
  if (refine_heads != 0 && dim % refine_heads != 0) {
    throw ConfigError("refinement heads (" + std::to_string(refine_heads) + ") must divide dim (" +
                      std::to_string(dim) + ")");
  }
  if (beta < 0.0) throw ConfigError("commitment weight beta must be non-negative");
  if (hard_temperature < 0.0) throw ConfigError("hard attention temperature must be non-negative");
}

BottleneckParams BottleneckParams::init(const BottleneckConfig& config, CounterRng& rng) {
  config.validate();
  BottleneckParams p;
  p.codebook = Codebook::init(config.codebook_size, config.dim, rng);
  if (config.use_disconx) p.cross = AttentionParams::init(config.dim, config.cross_heads, rng);
  if (config.refine_heads > 0) p.refine = AttentionParams::init(config.dim, config.refine_heads, rng);
  return p;
}

std::vector<Tensor> BottleneckParams::parameters() const {
  std::vector<Tensor> out{codebook.entries()};
  if (cross) {
    for (auto& t : cross->parameters()) out.push_back(t);
  }
  if (refine) {
    for (auto& t : refine->parameters()) out.push_back(t);
  }
  return out;
}

TokenMap disconx(const TokenMap& z_dis, const TokenMap& z_con, const AttentionParams& params) {
  if (z_dis.tokens.shape() != z_con.tokens.shape()) {
    throw DimensionError("disconx: discrete " + shape_str(z_dis.tokens.shape()) + " vs continuous " +
                         shape_str(z_con.tokens.shape()));
  }
  return mh_cross_attention(z_dis, z_con, params).output;
}

TokenMap fuse(const TokenMap& z_dis, const TokenMap& z_con, const TokenMap& z_attn) {
  const auto& s = z_con.tokens.shape();
  if (z_dis.tokens.shape() != s || z_attn.tokens.shape() != s) {
    throw DimensionError("fuse: shapes " + shape_str(z_dis.tokens.shape()) + ", " + shape_str(s) + ", " +
                         shape_str(z_attn.tokens.shape()) + " differ");
  }
  return TokenMap{add(add(z_dis.tokens, z_con.tokens), z_attn.tokens), z_con.height, z_con.width};
}

BottleneckOutput bottleneck_forward(const TokenMap& z_con, const BottleneckParams& params,
                                    const BottleneckConfig& config) {
  config.validate();
  if (config.use_disconx != params.cross.has_value() || (config.refine_heads > 0) != params.refine.has_value()) {
    throw ConfigError("bottleneck parameters do not match configuration");
  }
  auto quantized = quantize(z_con, params.codebook, config.beta);

  BottleneckOutput out;
  out.indices = std::move(quantized.indices);
  out.quant_loss = quantized.quant_loss;
  out.quant_margin = quantized.min_margin;
  out.hard_margin = std::numeric_limits<double>::infinity();
  out.z_q = config.straight_through
                ? TokenMap{straight_through(z_con.tokens, quantized.z_q.tokens), z_con.height, z_con.width}
                : quantized.z_q;

  if (config.use_disconx) {
    out.z_attn_dc = disconx(out.z_q, z_con, *params.cross);
    out.z_f = fuse(out.z_q, z_con, *out.z_attn_dc);
  } else {
    out.z_f = TokenMap{add(out.z_q.tokens, z_con.tokens), z_con.height, z_con.width};
  }

  if (config.refine_heads == 0) {
    out.output = out.z_f;
    return out;
  }
  auto refined = hard_self_attention(out.z_f, *params.refine, config.hard_temperature);
  out.hard_margin = refined.min_margin;
  out.z_ref = refined.output;
  out.output = TokenMap{add(out.z_f.tokens, refined.output.tokens), z_con.height, z_con.width};
  return out;
}

}  // namespace synergy
