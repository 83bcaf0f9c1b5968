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

// The discrete/continuous bottleneck:
//
//   z_q     = straight_through(z_con, quantize(z_con))
//   z_dc    = disconx(z_q, z_con)          queries discrete, keys/values continuous
//   z_f     = z_q + z_con + z_dc
//   z_ref   = hard_self_attention(z_f)     skipped when refine_heads == 0
//   output  = z_f + z_ref
//
// The "plain fusion" variant drops the cross-attention and uses
// z_f = z_q + z_con.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "synergy/attention.hpp"
#include "synergy/quantizer.hpp"
#include "synergy/tokens.hpp"

namespace synergy {

struct BottleneckConfig {
  std::size_t dim = 32;
  std::size_t codebook_size = 64;
  std::size_t cross_heads = 2;   // h_s
  std::size_t refine_heads = 2;  // h_h; 0 disables refinement
  double beta = 0.25;
  bool use_disconx = true;
  /// 0 keeps the argmax indicator; > 0 swaps in softmax(score / temperature).
  double hard_temperature = 0.0;
  /// When false, z_q is used as gathered (gradient to the codebook only).
  /// Gradient checks turn it off to compare against true derivatives.
  bool straight_through = true;

  void validate() const;
};

struct BottleneckParams {
  Codebook codebook;
  std::optional<AttentionParams> cross;   // present when use_disconx
  std::optional<AttentionParams> refine;  // present when refine_heads > 0

  /// Draw order: codebook, cross-attention, refinement.
  static BottleneckParams init(const BottleneckConfig& config, CounterRng& rng);
  std::vector<Tensor> parameters() const;
};

/// Cross-attention with discrete queries and continuous keys/values.
TokenMap disconx(const TokenMap& z_dis, const TokenMap& z_con, const AttentionParams& params);

/// Elementwise z_dis + z_con + z_attn; shapes must match exactly.
TokenMap fuse(const TokenMap& z_dis, const TokenMap& z_con, const TokenMap& z_attn);

struct BottleneckOutput {
  TokenMap output;
  Tensor quant_loss;
  std::vector<std::size_t> indices;
  TokenMap z_q;
  TokenMap z_f;
  std::optional<TokenMap> z_attn_dc;
  std::optional<TokenMap> z_ref;
  double quant_margin = 0.0;
  double hard_margin = 0.0;
};

BottleneckOutput bottleneck_forward(const TokenMap& z_con, const BottleneckParams& params,
                                    const BottleneckConfig& config);

}  // namespace synergy
