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

// Vector quantization of token maps against a learnable codebook.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "synergy/rng.hpp"
#include "synergy/tensor.hpp"
#include "synergy/tokens.hpp"

namespace synergy {

/// The K x dim embedding matrix. Rows are the discrete codes.
class Codebook {
 public:
  Codebook() = default;
  /// Takes ownership of a [K x dim] leaf; marks it as trainable.
  explicit Codebook(Tensor entries);

  /// Rows drawn uniformly from [-1/K, 1/K], row-major draw order.
  static Codebook init(std::size_t size, std::size_t dim, CounterRng& rng);

  std::size_t size() const { return entries_.dim(0); }
  std::size_t dim() const { return entries_.dim(1); }
  const Tensor& entries() const { return entries_; }
  Tensor& entries() { return entries_; }

 private:
  Tensor entries_;
};

/// Nearest-code search result for one token.
struct NearestCode {
  std::size_t index = 0;
  double distance_sq = 0.0;
  /// Second-best minus best squared distance (infinity when K == 1).
  double margin = 0.0;
};

/// argmin_k ||token - E_k||^2, summed over coordinates in order; ties go to
/// the lowest index.
NearestCode nearest_code(std::span<const double> token, const Codebook& book);

struct QuantizeResult {
  /// Each token replaced by its code row; gradient reaches only the codebook.
  TokenMap z_q;
  std::vector<std::size_t> indices;
  Tensor quant_loss;
  /// Smallest second-best/best distance gap over all tokens.
  double min_margin = 0.0;
};

/// Quantizes every token of `z_con`; quant_loss uses commitment weight beta.
QuantizeResult quantize(const TokenMap& z_con, const Codebook& book, double beta = 0.25);

/// mean_t ||sg(z_con_t) - z_q_t||^2 + beta * mean_t ||z_con_t - sg(z_q_t)||^2.
/// The first term trains the codebook, the second commits the encoder.
Tensor quantization_loss(const Tensor& z_con, const Tensor& z_q, double beta);
/// The two terms on their own; gradients reach only z_q and only z_con.
Tensor codebook_loss(const Tensor& z_con, const Tensor& z_q);
Tensor commitment_loss(const Tensor& z_con, const Tensor& z_q, double beta);

/// Forward value is z_q; backward hands the upstream gradient to z_con
/// unchanged and sends nothing to z_q.
Tensor straight_through(const Tensor& z_con, const Tensor& z_q);

struct CodebookStats {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  /// Fraction of codes hit at least once.
  double utilization = 0.0;
  double dead_fraction = 0.0;
  /// exp of the natural-log entropy of the empirical code distribution.
  double perplexity = 0.0;
};

CodebookStats codebook_stats(std::span<const std::size_t> indices, std::size_t codebook_size);

}  // namespace synergy
