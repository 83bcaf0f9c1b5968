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

#include "synergy/quantizer.hpp"

#include <cmath>
#include <limits>

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

Codebook::Codebook(Tensor entries) : entries_(std::move(entries)) {
  if (entries_.rank() != 2 || entries_.dim(0) == 0 || entries_.dim(1) == 0) {
    throw ConfigError("codebook must be a non-empty [K x dim] matrix, got " + shape_str(entries_.shape()));
  }
  entries_.set_requires_grad(true);
}

Codebook Codebook::init(std::size_t size, std::size_t dim, CounterRng& rng) {
  if (size < 2 || dim < 1) {
    throw ConfigError("codebook needs K >= 2 and dim >= 1, got K=" + std::to_string(size) +
                      " dim=" + std::to_string(dim));
  }
  const double bound = 1.0 / static_cast<double>(size);
  std::vector<double> values(size * dim);
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return Codebook(Tensor::from({size, dim}, std::move(values)));
}

NearestCode nearest_code(std::span<const double> token, const Codebook& book) {
  const auto e = book.entries().data();
  const std::size_t dim = book.dim();
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < book.size(); ++k) {
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = token[j] - e[k * dim + j];
      d += diff * diff;
    }
    if (d < best) {
      second = best;
      best = d;
      best_k = k;
    } else if (d < second) {
      second = d;
    }
  }
  return NearestCode{best_k, best, second - best};
}

QuantizeResult quantize(const TokenMap& z_con, const Codebook& book, double beta) {
  if (z_con.dim() != book.dim()) {
    throw DimensionError("quantize: token width " + std::to_string(z_con.dim()) + " vs codebook width " +
                         std::to_string(book.dim()));
  }
  const std::size_t n = z_con.batch() * z_con.count();
  const std::size_t dim = z_con.dim();
  const auto values = z_con.tokens.data();

  QuantizeResult result;
  result.indices.resize(n);
  result.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const auto hit = nearest_code(values.subspan(t * dim, dim), book);
    result.indices[t] = hit.index;
    result.min_margin = std::min(result.min_margin, hit.margin);
  }
  Tensor rows = gather_rows(book.entries(), result.indices);
  result.z_q = TokenMap::wrap(reshape(rows, z_con.tokens.shape()), z_con.height, z_con.width);
  result.quant_loss = quantization_loss(z_con.tokens, result.z_q.tokens, beta);
  return result;
}

namespace {

void check_pair(const char* what, const Tensor& z_con, const Tensor& z_q) {
  if (z_con.shape() != z_q.shape() || z_con.rank() == 0) {
    throw DimensionError(std::string(what) + ": " + shape_str(z_con.shape()) + " vs " + shape_str(z_q.shape()));
  }
}

double token_count(const Tensor& z) { return static_cast<double>(z.numel() / z.shape().back()); }

}  // namespace

Tensor codebook_loss(const Tensor& z_con, const Tensor& z_q) {
  check_pair("codebook_loss", z_con, z_q);
  return scale(sum(square(sub(stop_gradient(z_con), z_q))), 1.0 / token_count(z_con));
}

Tensor commitment_loss(const Tensor& z_con, const Tensor& z_q, double beta) {
  check_pair("commitment_loss", z_con, z_q);
  return scale(sum(square(sub(z_con, stop_gradient(z_q)))), beta / token_count(z_con));
}

Tensor quantization_loss(const Tensor& z_con, const Tensor& z_q, double beta) {
  check_pair("quantization_loss", z_con, z_q);
  Tensor codebook_term = codebook_loss(z_con, z_q);
  if (beta == 0.0) return codebook_term;
  return add(codebook_term, commitment_loss(z_con, z_q, beta));
}

Tensor straight_through(const Tensor& z_con, const Tensor& z_q) {
  if (z_con.shape() != z_q.shape()) {
    throw DimensionError("straight_through: " + shape_str(z_con.shape()) + " vs " + shape_str(z_q.shape()));
  }
  std::vector<double> values(z_q.data().begin(), z_q.data().end());
  return make_op("straight_through", z_q.shape(), std::move(values), {z_con},
                 [](const TensorImpl& o, std::span<std::vector<double>* const> g) {
                   auto& gc = *g[0];
                   for (std::size_t i = 0; i < gc.size(); ++i) gc[i] += o.grad[i];
                 });
}

CodebookStats codebook_stats(std::span<const std::size_t> indices, std::size_t codebook_size) {
  CodebookStats s;
  s.counts.assign(codebook_size, 0);
  for (auto k : indices) {
    if (k >= codebook_size) throw DimensionError("codebook_stats: index " + std::to_string(k) + " >= K");
    ++s.counts[k];
  }
  s.total = indices.size();
  std::size_t used = 0;
  double entropy = 0.0;
  for (auto c : s.counts) {
    if (c == 0) continue;
    ++used;
    const double p = static_cast<double>(c) / static_cast<double>(s.total);
    entropy -= p * std::log(p);
  }
  if (codebook_size > 0) {
    s.utilization = static_cast<double>(used) / static_cast<double>(codebook_size);
    s.dead_fraction = 1.0 - s.utilization;
  }
  s.perplexity = s.total == 0 ? 0.0 : std::exp(entropy);
  return s;
}

}  // namespace synergy
