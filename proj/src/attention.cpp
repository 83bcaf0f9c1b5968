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

#include "synergy/attention.hpp"

#include <cmath>
#include <limits>

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

namespace {

Tensor init_matrix(std::size_t dim, CounterRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> v(dim * dim);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({dim, dim}, std::move(v), true);
}

// Per-head scaled scores [B x Tq x Tk] from already projected queries/keys.
Tensor head_scores(const Tensor& q, const Tensor& k, std::size_t head, std::size_t head_dim) {
  Tensor qh = slice(q, 2, head * head_dim, head_dim);
  Tensor kh = slice(k, 2, head * head_dim, head_dim);
  return scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(head_dim)));
}

}  // namespace

AttentionParams AttentionParams::init(std::size_t dim, std::size_t heads, CounterRng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide dim (" + std::to_string(dim) + ")");
  }
  AttentionParams p;
  p.heads = heads;
  p.w_query = init_matrix(dim, rng);
  p.w_key = init_matrix(dim, rng);
  p.w_value = init_matrix(dim, rng);
  p.w_out = init_matrix(dim, rng);
  return p;
}

void AttentionParams::validate() const {
  const std::size_t d = w_query.dim(0);
  for (const auto* m : {&w_query, &w_key, &w_value, &w_out}) {
    if (m->rank() != 2 || m->dim(0) != d || m->dim(1) != d) {
      throw ConfigError("attention projections must all be " + std::to_string(d) + "x" + std::to_string(d));
    }
  }
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide dim (" + std::to_string(d) + ")");
  }
}

AttentionResult mh_cross_attention(const TokenMap& queries, const TokenMap& keys_values,
                                   const AttentionParams& params) {
  params.validate();
  if (queries.dim() != params.dim() || keys_values.dim() != params.dim() ||
      queries.batch() != keys_values.batch()) {
    throw DimensionError("mh_cross_attention: queries " + shape_str(queries.tokens.shape()) + ", keys/values " +
                         shape_str(keys_values.tokens.shape()) + ", dim " + std::to_string(params.dim()));
  }
  const std::size_t dh = params.head_dim();
  Tensor q = matmul(queries.tokens, params.w_query);
  Tensor k = matmul(keys_values.tokens, params.w_key);
  Tensor v = matmul(keys_values.tokens, params.w_value);

  AttentionResult result;
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < params.heads; ++h) {
    Tensor weights = softmax(head_scores(q, k, h, dh), 2);
    heads.push_back(matmul(weights, slice(v, 2, h * dh, dh)));
    result.weights.push_back(weights);
  }
  Tensor merged = params.heads == 1 ? heads.front() : concat(heads, 2);
  result.output = TokenMap::wrap(matmul(merged, params.w_out), queries.height, queries.width);
  return result;
}

HardAttentionResult hard_self_attention(const TokenMap& tokens, const AttentionParams& params, double temperature) {
  params.validate();
  if (tokens.dim() != params.dim()) {
    throw DimensionError("hard_self_attention: tokens " + shape_str(tokens.tokens.shape()) + " vs dim " +
                         std::to_string(params.dim()));
  }
  const std::size_t batch = tokens.batch();
  const std::size_t count = tokens.count();
  const std::size_t dh = params.head_dim();

  HardAttentionResult result;
  result.min_margin = std::numeric_limits<double>::infinity();
  Tensor v = matmul(tokens.tokens, params.w_value);
  std::vector<Tensor> heads;

  if (temperature > 0.0) {
    Tensor q = matmul(tokens.tokens, params.w_query);
    Tensor k = matmul(tokens.tokens, params.w_key);
    for (std::size_t h = 0; h < params.heads; ++h) {
      Tensor weights = softmax(scale(head_scores(q, k, h, dh), 1.0 / temperature), 2);
      heads.push_back(matmul(weights, slice(v, 2, h * dh, dh)));
      result.weights.push_back(weights);
    }
  } else {
    Tensor scores_all;
    std::vector<Tensor> scores;
    {
      NoGradGuard no_grad;
      Tensor q = matmul(tokens.tokens, params.w_query);
      Tensor k = matmul(tokens.tokens, params.w_key);
      for (std::size_t h = 0; h < params.heads; ++h) scores.push_back(head_scores(q, k, h, dh));
    }
    for (std::size_t h = 0; h < params.heads; ++h) {
      const auto s = scores[h].data();
      std::vector<std::size_t> rows(batch * count);
      std::vector<double> one_hot(batch * count * count, 0.0);
      for (std::size_t r = 0; r < batch * count; ++r) {
        const double* row = s.data() + r * count;
        double best = -std::numeric_limits<double>::infinity();
        double second = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < count; ++j) {
          if (row[j] > best) {
            second = best;
            best = row[j];
            arg = j;
          } else if (row[j] > second) {
            second = row[j];
          }
        }
        result.min_margin = std::min(result.min_margin, best - second);
        one_hot[r * count + arg] = 1.0;
        // Gather index into the flattened [B*T x dh] value matrix.
        rows[r] = (r / count) * count + arg;
      }
      Tensor vh = reshape(slice(v, 2, h * dh, dh), {batch * count, dh});
      heads.push_back(reshape(gather_rows(vh, rows), {batch, count, dh}));
      result.weights.push_back(Tensor::from({batch, count, count}, std::move(one_hot)));
      for (auto& r : rows) r %= count;
      result.selected.push_back(std::move(rows));
    }
  }
  Tensor merged = params.heads == 1 ? heads.front() : concat(heads, 2);
  result.output = TokenMap::wrap(matmul(merged, params.w_out), tokens.height, tokens.width);
  return result;
}

}  // namespace synergy
