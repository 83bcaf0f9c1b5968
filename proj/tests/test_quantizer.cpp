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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "oracles.hpp"
#include "synergy/errors.hpp"
#include "synergy/gradcheck.hpp"
#include "synergy/ops.hpp"
#include "synergy/quantizer.hpp"
#include "synergy/rng.hpp"

namespace synergy {
namespace {

using namespace oracle;

TEST(QuantizeTest, PicksNearerCode) {
  Codebook book(Tensor::from({2, 2}, {0, 0, 1, 1}));
  auto r = quantize(tokens_of(Tensor::from({1, 1, 2}, {0.1, 0.1})), book);
  EXPECT_EQ(r.indices, std::vector<std::size_t>{0});
  EXPECT_EQ(r.z_q.tokens.data()[0], 0.0);
  EXPECT_EQ(r.z_q.tokens.data()[1], 0.0);
}

TEST(QuantizeTest, TokenOnACodeHasZeroDistance) {
  Codebook book(Tensor::from({3, 2}, {0, 0, 1, 1, -2, 0.5}));
  auto r = quantize(tokens_of(Tensor::from({1, 1, 2}, {-2, 0.5})), book);
  EXPECT_EQ(r.indices, std::vector<std::size_t>{2});
  EXPECT_EQ(r.quant_loss.item(), 0.0);
  EXPECT_EQ(nearest_code(std::vector<double>{-2, 0.5}, book).distance_sq, 0.0);
}

TEST(QuantizeTest, MatchesExhaustiveScan) {
  CounterRng rng(16);
  Tensor z = random(rng, {1, 64, 5});
  Codebook book(random(rng, {16, 5}));
  auto r = quantize(tokens_of(z), book);
  EXPECT_EQ(r.indices, scan_oracle(z, book.entries()));
}

TEST(QuantizeTest, TiesGoToLowestIndex) {
  // Duplicate rows and an exact midpoint; dyadic values keep distances exact.
  Codebook book(Tensor::from({4, 2}, {1, 1, 0.5, -0.5, 1, 1, -0.5, 0.5}));
  auto r = quantize(tokens_of(Tensor::from({1, 3, 2}, {1, 1, 0, 0, 0.75, 0.25})), book);
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1, 0}));
  // (0.75,0.25) is equidistant from codes 0, 1 and 2.
  EXPECT_EQ(nearest_code(std::vector<double>{0.75, 0.25}, book).margin, 0.0);
}

TEST(QuantizeTest, QuantizedTokensAreBitwiseRows) {
  CounterRng rng(3);
  Codebook book(random(rng, {8, 3}));
  auto r = quantize(tokens_of(random(rng, {2, 10, 3})), book);
  for (std::size_t t = 0; t < 20; ++t) {
    EXPECT_TRUE(bitwise_equal(r.z_q.tokens.data().subspan(t * 3, 3),
                              book.entries().data().subspan(r.indices[t] * 3, 3)));
  }
}

TEST(QuantizeTest, ShiftingEverythingKeepsTheChoice) {
  CounterRng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    // Multiples of 1/8 in a small range: the shift is exact.
    auto dyadic = [&](Shape s) {
      std::vector<double> v(shape_numel(s));
      for (auto& x : v) x = static_cast<double>(rng.below(33)) / 8.0 - 2.0;
      return Tensor::from(std::move(s), std::move(v));
    };
    Tensor z = dyadic({1, 12, 3});
    Tensor e = dyadic({6, 3});
    const std::vector<double> shift{0.5, -1.25, 3.0};
    auto shifted = [&](const Tensor& t) {
      std::vector<double> v(t.data().begin(), t.data().end());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += shift[i % 3];
      return Tensor::from(t.shape(), std::move(v));
    };
    EXPECT_EQ(quantize(tokens_of(z), Codebook(e)).indices,
              quantize(tokens_of(shifted(z)), Codebook(shifted(e))).indices);
  }
}

TEST(QuantizeTest, WidthMismatchIsADimensionError) {
  Codebook book(Tensor::zeros({4, 3}));
  EXPECT_THROW(quantize(tokens_of(Tensor::zeros({1, 2, 2})), book), DimensionError);
}

TEST(QuantizationLossTest, Examples) {
  Tensor code = Tensor::from({1, 1, 2}, {0, 0});
  EXPECT_EQ(quantization_loss(Tensor::from({1, 1, 2}, {1, 0}), code, 0.0).item(), 1.0);
  EXPECT_EQ(quantization_loss(code, code, 0.25).item(), 0.0);
  // Forward value: (1 + beta) times the mean squared distance.
  Tensor z = Tensor::from({1, 2, 2}, {1, 0, 0, 2});
  EXPECT_DOUBLE_EQ(quantization_loss(z, Tensor::zeros({1, 2, 2}), 0.25).item(), 1.25 * (1.0 + 4.0) / 2.0);
}

TEST(QuantizationLossTest, CommitmentGradientMatchesClosedForm) {
  CounterRng rng(5);
  Tensor z = random(rng, {1, 4, 3}, 1.0, true);
  Tensor q = random(rng, {1, 4, 3});
  const double beta = 0.25;
  commitment_loss(z, q, beta).backward();
  for (std::size_t i = 0; i < z.numel(); ++i) {
    EXPECT_NEAR(z.grad()[i], beta * 2.0 * (z.data()[i] - q.data()[i]) / 4.0, 1e-15);
  }
  EXPECT_LT(fd_check([&](const Tensor& x) { return commitment_loss(x, q, beta); }, z, 1e-4), 1e-8);
}

TEST(QuantizationLossTest, CodebookMovesOnlyThroughTheCodebookTerm) {
  CounterRng rng(8);
  Tensor z = random(rng, {1, 6, 2}, 1.0, true);
  Codebook book(random(rng, {4, 2}));
  auto r = quantize(tokens_of(z), book);
  commitment_loss(z, r.z_q.tokens, 0.25).backward();
  EXPECT_FALSE(book.entries().has_grad());
  EXPECT_TRUE(z.has_grad());
  z.zero_grad();
  auto r2 = quantize(tokens_of(z), book);
  codebook_loss(z, r2.z_q.tokens).backward();
  EXPECT_TRUE(book.entries().has_grad());
  EXPECT_FALSE(z.has_grad());
}

TEST(StraightThroughTest, ForwardIsQuantizedValue) {
  Tensor y = straight_through(Tensor::from({2}, {1, 2}, true), Tensor::from({2}, {0, 0}, true));
  EXPECT_EQ(y.data()[0], 0.0);
  EXPECT_EQ(y.data()[1], 0.0);
}

TEST(StraightThroughTest, BackwardCopiesUpstreamGradient) {
  Tensor zc = Tensor::from({2}, {1, 2}, true);
  Tensor zq = Tensor::from({2}, {0, 0}, true);
  sum(mul(straight_through(zc, zq), Tensor::from({2}, {3, 4}))).backward();
  EXPECT_EQ(zc.grad()[0], 3.0);
  EXPECT_EQ(zc.grad()[1], 4.0);
  EXPECT_FALSE(zq.has_grad());
}

TEST(StraightThroughTest, JacobianIsIdentityByUnitVectors) {
  CounterRng rng(13);
  for (std::size_t d = 1; d <= 8; ++d) {
    Tensor zc = random(rng, {d}, 1.0, true);
    Tensor zq = random(rng, {d});
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> unit(d, 0.0);
      unit[i] = 1.0;
      zc.zero_grad();
      sum(mul(straight_through(zc, zq), Tensor::from({d}, unit))).backward();
      for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(zc.grad()[j], i == j ? 1.0 : 0.0);
    }
  }
}

TEST(StraightThroughTest, MatchesIdentityWiringOracle) {
  CounterRng rng(17);
  Codebook book(random(rng, {5, 3}));
  Tensor zc = random(rng, {1, 2, 3}, 1.0, true);
  Tensor w = random(rng, {1, 2, 3});
  auto loss = [&](const Tensor& x) { return sum(mul(sigmoid(mul(x, w)), square(x))); };

  auto r = quantize(tokens_of(zc), book);
  loss(straight_through(zc, r.z_q.tokens)).backward();

  // Identity wiring: differentiate the same loss at the quantized point directly.
  Tensor at_q = Tensor::from(r.z_q.tokens.shape(), {r.z_q.tokens.data().begin(), r.z_q.tokens.data().end()}, true);
  loss(at_q).backward();
  EXPECT_TRUE(bitwise_equal(zc.grad(), at_q.grad()));
}

TEST(CodebookStatsTest, DegenerateAndUniform) {
  const std::vector<std::size_t> zeros(10, 0);
  auto s = codebook_stats(zeros, 4);
  EXPECT_EQ(s.utilization, 0.25);
  EXPECT_EQ(s.dead_fraction, 0.75);
  EXPECT_EQ(s.perplexity, 1.0);
  const std::vector<std::size_t> uniform{0, 1, 2, 3, 3, 2, 1, 0};
  EXPECT_NEAR(codebook_stats(uniform, 4).perplexity, 4.0, 1e-12);
}

TEST(CodebookStatsTest, PerplexityMatchesDirectEntropy) {
  CounterRng rng(99);
  std::vector<std::size_t> idx(500);
  for (auto& i : idx) i = rng.below(3) == 0 ? rng.below(16) : rng.below(4);
  std::vector<double> counts(16, 0.0);
  for (auto i : idx) counts[i] += 1;
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= c / 500.0 * std::log(c / 500.0);
  auto s = codebook_stats(idx, 16);
  EXPECT_NEAR(s.perplexity, std::exp(h), 1e-12);
  EXPECT_EQ(s.total, 500u);
}

TEST(CodebookTest, InitStaysInRange) {
  CounterRng rng(1);
  Codebook book = Codebook::init(64, 8, rng);
  EXPECT_EQ(book.size(), 64u);
  for (double v : book.entries().data()) {
    EXPECT_LE(std::abs(v), 1.0 / 64.0);
  }
  EXPECT_TRUE(book.entries().requires_grad());
}

}  // namespace
}  // namespace synergy
