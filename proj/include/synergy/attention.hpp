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

// Multi-head soft cross-attention and hard (argmax) self-attention.
//
// Scores are scaled dot products of per-head projections,
//   score_h(i, j) = <q_i W_q^h, k_j W_k^h> / sqrt(dim / heads),
// where W^h is the column block [h*dh, (h+1)*dh) of the dim x dim matrix.
// Head outputs are concatenated along the feature axis and multiplied by W_o.

#pragma once

#include <cstddef>
#include <vector>

#include "synergy/rng.hpp"
#include "synergy/tensor.hpp"
#include "synergy/tokens.hpp"

namespace synergy {

struct AttentionParams {
  std::size_t heads = 1;
  Tensor w_query;  // dim x dim
  Tensor w_key;    // dim x dim
  Tensor w_value;  // dim x dim
  Tensor w_out;    // dim x dim

  std::size_t dim() const { return w_query.dim(0); }
  std::size_t head_dim() const { return dim() / heads; }

  /// U(-1/sqrt(dim), 1/sqrt(dim)) for each matrix, drawn in the order
  /// query, key, value, out (row-major within each).
  static AttentionParams init(std::size_t dim, std::size_t heads, CounterRng& rng);
  std::vector<Tensor> parameters() const { return {w_query, w_key, w_value, w_out}; }
  /// Throws ConfigError unless heads >= 1 divides dim and shapes are square.
  void validate() const;
};

struct AttentionResult {
  TokenMap output;
  /// Per-head weight matrices [B x Tq x Tk]. Hard attention stores one-hot rows.
  std::vector<Tensor> weights;
};

/// Soft multi-head attention of `queries` over `keys_values`.
AttentionResult mh_cross_attention(const TokenMap& queries, const TokenMap& keys_values,
                                   const AttentionParams& params);

struct HardAttentionResult {
  TokenMap output;
  std::vector<Tensor> weights;
  /// selected[h][b * T + i] = token chosen by query i of batch b in head h.
  std::vector<std::vector<std::size_t>> selected;
  /// Smallest best-minus-runner-up similarity gap over all rows and heads
  /// (infinity when T == 1).
  double min_margin = 0.0;
};

/// Hard self-attention: each token takes the value projection of its most
/// similar token (ties to the lowest index). The selection is a constant for
/// backward, so only the value path and W_o receive gradient. With
/// `temperature > 0` the indicator is replaced by softmax(score / temperature).
HardAttentionResult hard_self_attention(const TokenMap& tokens, const AttentionParams& params,
                                        double temperature = 0.0);

}  // namespace synergy
