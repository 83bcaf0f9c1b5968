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

#include "oracles.hpp"
#include "synergy/bottleneck.hpp"
#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {
namespace {

using namespace oracle;

BottleneckConfig small_config() {
  BottleneckConfig c;
  c.dim = 4;
  c.codebook_size = 6;
  c.cross_heads = 2;
  c.refine_heads = 2;
  return c;
}

TEST(BottleneckTest, MatchesComposedOracle) {
  CounterRng rng(31);
  const BottleneckConfig config = small_config();
  int checked = 0;
  while (checked < 20) {
    BottleneckParams params = BottleneckParams::init(config, rng);
    // A 2 x 2 latent map, one batch element.
    TokenMap z = TokenMap::wrap(random(rng, {1, 4, 4}, 0.2), 2, 2);
    auto out = bottleneck_forward(z, params, config);
    if (out.quant_margin < 1e-9 || out.hard_margin < 1e-9) continue;

    const Matrix zc = rows(z.tokens, 0);
    const auto idx = scan_oracle(z.tokens, params.codebook.entries());
    const Matrix book = rows(reshape(params.codebook.entries(), {1, 6, 4}), 0);
    Matrix zq(4), zf(4, std::vector<double>(4));
    double dist = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
      zq[t] = book[idx[t]];
      for (std::size_t j = 0; j < 4; ++j) dist += (zc[t][j] - zq[t][j]) * (zc[t][j] - zq[t][j]);
    }
    const Matrix attn = attention_oracle(zq, zc, *params.cross, false);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < 4; ++j) zf[t][j] = zq[t][j] + zc[t][j] + attn[t][j];
    const Matrix ref = attention_oracle(zf, zf, *params.refine, true);
    Matrix expect = zf;
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < 4; ++j) expect[t][j] += ref[t][j];

    EXPECT_EQ(out.indices, idx);
    EXPECT_LT(max_abs_diff(expect, out.output.tokens, 0), 1e-12);
    EXPECT_NEAR(out.quant_loss.item(), (1.0 + config.beta) * dist / 4.0, 1e-14);
    ++checked;
  }
}

TEST(BottleneckTest, NoRefinementReturnsFusionBitwise) {
  CounterRng rng(32);
  BottleneckConfig config = small_config();
  config.refine_heads = 0;
  BottleneckParams params = BottleneckParams::init(config, rng);
  EXPECT_FALSE(params.refine.has_value());
  TokenMap z = TokenMap::wrap(random(rng, {2, 4, 4}), 2, 2);
  auto out = bottleneck_forward(z, params, config);
  EXPECT_TRUE(bitwise_equal(out.output.tokens.data(), out.z_f.tokens.data()));
  Tensor manual = fuse(out.z_q, z, *out.z_attn_dc).tokens;
  EXPECT_TRUE(bitwise_equal(out.output.tokens.data(), manual.data()));
}

TEST(BottleneckTest, SingleCodeStaysFinite) {
  CounterRng rng(33);
  BottleneckConfig config = small_config();
  BottleneckParams params = BottleneckParams::init(config, rng);
  params.codebook = Codebook(random(rng, {1, 4}));
  TokenMap z = TokenMap::wrap(random(rng, {1, 4, 4}), 2, 2);
  auto out = bottleneck_forward(z, params, config);
  for (auto i : out.indices) EXPECT_EQ(i, 0u);
  EXPECT_TRUE(std::isinf(out.quant_margin));
  EXPECT_EQ(first_non_finite(out.output.tokens), -1);
  EXPECT_TRUE(std::isfinite(out.quant_loss.item()));
}

TEST(BottleneckTest, PlainFusionVariantSkipsCrossAttention) {
  CounterRng rng(34);
  BottleneckConfig config = small_config();
  config.use_disconx = false;
  config.refine_heads = 0;
  BottleneckParams params = BottleneckParams::init(config, rng);
  EXPECT_FALSE(params.cross.has_value());
  TokenMap z = TokenMap::wrap(random(rng, {1, 4, 4}), 2, 2);
  auto out = bottleneck_forward(z, params, config);
  EXPECT_FALSE(out.z_attn_dc.has_value());
  Tensor expect = add(out.z_q.tokens, z.tokens);
  EXPECT_TRUE(bitwise_equal(out.output.tokens.data(), expect.data()));
}

TEST(BottleneckTest, MismatchedParametersAreRejected) {
  CounterRng rng(35);
  BottleneckConfig config = small_config();
  BottleneckParams params = BottleneckParams::init(config, rng);
  config.refine_heads = 0;
  EXPECT_THROW(bottleneck_forward(TokenMap::wrap(random(rng, {1, 4, 4}), 2, 2), params, config), ConfigError);
  config.cross_heads = 3;
  EXPECT_THROW(config.validate(), ConfigError);
}

TEST(BottleneckTest, StraightThroughRoutesGradientToEncoderSide) {
  CounterRng rng(36);
  BottleneckConfig config = small_config();
  BottleneckParams params = BottleneckParams::init(config, rng);
  Tensor z = random(rng, {1, 4, 4}, 1.0, true);
  auto out = bottleneck_forward(TokenMap::wrap(z, 2, 2), params, config);
  sum(square(out.output.tokens)).backward();
  EXPECT_TRUE(z.has_grad());
  // The codebook trains only through the quantization loss.
  EXPECT_FALSE(params.codebook.entries().has_grad());
  out.quant_loss.backward();
  EXPECT_TRUE(params.codebook.entries().has_grad());
}

TEST(FuseTest, ZeroDiscreteAndAttendedGiveIdentity) {
  CounterRng rng(40);
  TokenMap zc = TokenMap::wrap(random(rng, {2, 6, 4}), 2, 3);
  TokenMap zero = TokenMap::wrap(Tensor::zeros({2, 6, 4}), 2, 3);
  EXPECT_TRUE(bitwise_equal(fuse(zero, zc, zero).tokens.data(), zc.tokens.data()));
}

TEST(FuseTest, OrderOfOperandsDoesNotMatter) {
  CounterRng rng(41);
  // Dyadic values sum exactly in any order.
  auto dyadic = [&] {
    std::vector<double> v(12);
    for (auto& x : v) x = static_cast<double>(rng.below(64)) / 16.0 - 2.0;
    return TokenMap::wrap(Tensor::from({1, 3, 4}, v), 1, 3);
  };
  TokenMap a = dyadic(), b = dyadic(), c = dyadic();
  EXPECT_TRUE(bitwise_equal(fuse(a, b, c).tokens.data(), fuse(c, a, b).tokens.data()));
  TokenMap x = TokenMap::wrap(random(rng, {1, 3, 4}), 1, 3), y = TokenMap::wrap(random(rng, {1, 3, 4}), 1, 3),
           w = TokenMap::wrap(random(rng, {1, 3, 4}), 1, 3);
  Tensor f = fuse(x, y, w).tokens;
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(f.data()[i], x.tokens.data()[i] + y.tokens.data()[i] + w.tokens.data()[i], 1e-15);
  }
}

TEST(FuseTest, ShapeMismatchIsADimensionError) {
  TokenMap a = TokenMap::wrap(Tensor::zeros({1, 4, 4}), 2, 2);
  TokenMap b = TokenMap::wrap(Tensor::zeros({1, 4, 2}), 2, 2);
  EXPECT_THROW(fuse(a, a, b), DimensionError);
  EXPECT_THROW(fuse(b, a, a), DimensionError);
}

TEST(TokenMapTest, SpatialRoundTripIsIdentity) {
  CounterRng rng(42);
  Tensor x = random(rng, {2, 3, 4, 5});
  TokenMap t = TokenMap::from_spatial(x);
  EXPECT_EQ(t.count(), 20u);
  EXPECT_EQ(t.dim(), 3u);
  // Token (r, c) holds the channel vector at that pixel.
  EXPECT_EQ(t.tokens.data()[(1 * 20 + 2 * 5 + 3) * 3 + 2], x.data()[((1 * 3 + 2) * 4 + 2) * 5 + 3]);
  EXPECT_TRUE(bitwise_equal(t.to_spatial().data(), x.data()));
  EXPECT_THROW(TokenMap::wrap(Tensor::zeros({1, 5, 2}), 2, 2), DimensionError);
}

}  // namespace
}  // namespace synergy
