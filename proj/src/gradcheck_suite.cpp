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

#include "synergy/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "synergy/attention.hpp"
#include "synergy/errors.hpp"
#include "synergy/gradcheck.hpp"
#include "synergy/metrics.hpp"
#include "synergy/ops.hpp"
#include "synergy/quantizer.hpp"

namespace synergy {

namespace {

constexpr std::size_t kMaxDraws = 500;

Tensor uniform(CounterRng& rng, Shape shape, double lo, double hi, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

// Values with |x| in [lo, hi] and a random sign.
Tensor away_from_zero(CounterRng& rng, Shape shape, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Scalarizes y with fixed random weights so every output coordinate counts.
struct Probe {
  Tensor weights;
  Tensor operator()(const Tensor& y) const { return sum(mul(y, weights)); }
};

Probe probe_for(CounterRng& rng, const Shape& shape) { return Probe{uniform(rng, shape, -1.0, 1.0, false)}; }

// One instance of a case: the scalar function, its leaves and, for cases
// with discrete decisions, the smallest decision margin of the instance.
struct Instance {
  std::function<Tensor()> f;
  std::vector<Tensor> leaves;
  std::optional<double> margin;
};

using Builder = std::function<Instance(CounterRng&, std::size_t)>;

struct Case {
  std::string name;
  bool composed = false;
  Builder build;
};

// Shape class by instance: same shape, trailing-suffix broadcast, scalar.
Shape rhs_shape(std::size_t instance) {
  switch (instance % 3) {
    case 0:
      return {2, 3, 4};
    case 1:
      return {3, 4};
    default:
      return {};
  }
}

Case binary(std::string name, Tensor (*op)(const Tensor&, const Tensor&), bool positive_rhs) {
  return {std::move(name), false, [op, positive_rhs](CounterRng& rng, std::size_t i) {
            Tensor a = uniform(rng, {2, 3, 4}, -2.0, 2.0);
            Tensor b = positive_rhs ? away_from_zero(rng, rhs_shape(i), 0.5, 2.0) : uniform(rng, rhs_shape(i), -2.0, 2.0);
            Probe p = probe_for(rng, {2, 3, 4});
            return Instance{[=] { return p(op(a, b)); }, {a, b}, std::nullopt};
          }};
}

Case unary(std::string name, std::function<Tensor(const Tensor&)> op,
           std::function<Tensor(CounterRng&, const Shape&)> draw) {
  return {std::move(name), false, [op, draw](CounterRng& rng, std::size_t i) {
            const Shape shape = i % 2 == 0 ? Shape{3, 5} : Shape{2, 2, 3};
            Tensor x = draw(rng, shape);
            Probe p = probe_for(rng, op(x.detach()).shape());
            return Instance{[=] { return p(op(x)); }, {x}, std::nullopt};
          }};
}

auto draw_uniform(double lo, double hi) {
  return [lo, hi](CounterRng& rng, const Shape& s) { return uniform(rng, s, lo, hi); };
}

auto draw_away(double lo, double hi) {
  return [lo, hi](CounterRng& rng, const Shape& s) { return away_from_zero(rng, s, lo, hi); };
}

TokenMap random_tokens(CounterRng& rng, std::size_t batch, std::size_t h, std::size_t w, std::size_t dim) {
  return TokenMap::wrap(uniform(rng, {batch, h * w, dim}, -1.0, 1.0), h, w);
}

std::vector<Case> elementary_cases() {
  std::vector<Case> cases;
  cases.push_back(binary("add", add, false));
  cases.push_back(binary("sub", sub, false));
  cases.push_back(binary("mul", mul, false));
  cases.push_back(binary("div", div, true));
  cases.push_back(unary("neg", neg, draw_uniform(-2, 2)));
  cases.push_back(unary("scale", [](const Tensor& x) { return scale(x, -1.7); }, draw_uniform(-2, 2)));
  cases.push_back(unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.3); }, draw_uniform(-2, 2)));
  cases.push_back(unary("relu", relu, draw_away(0.05, 2)));
  cases.push_back(unary("sigmoid", sigmoid, draw_uniform(-4, 4)));
  cases.push_back(unary("exp", exp, draw_uniform(-2, 2)));
  cases.push_back(unary("log", log, draw_uniform(0.2, 3)));
  cases.push_back(unary("square", square, draw_uniform(-2, 2)));
  cases.push_back(unary("sqrt", sqrt, draw_uniform(0.2, 3)));
  cases.push_back(unary(
      "clamp", [](const Tensor& x) { return clamp(x, -0.5, 0.5); },
      [](CounterRng& rng, const Shape& s) {
        // keep every value at least 0.05 away from both bounds
        std::vector<double> v(shape_numel(s));
        for (auto& x : v) {
          const double u = rng.uniform(0.0, 1.0);
          x = u < 0.5 ? rng.uniform(-0.45, 0.45) : (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.55, 2.0);
        }
        return Tensor::from(s, std::move(v), true);
      }));
  cases.push_back(unary("sum", [](const Tensor& x) { return sum(x); }, draw_uniform(-2, 2)));
  cases.push_back(unary("mean", [](const Tensor& x) { return mean(x); }, draw_uniform(-2, 2)));
  cases.push_back(unary("reshape", [](const Tensor& x) { return reshape(x, {x.numel()}); }, draw_uniform(-2, 2)));
  cases.push_back(unary("transpose", transpose, draw_uniform(-2, 2)));
  cases.push_back(unary("slice", [](const Tensor& x) { return slice(x, x.rank() - 1, 1, 2); }, draw_uniform(-2, 2)));
  cases.push_back(unary("softmax", [](const Tensor& x) { return softmax(x, x.rank() - 1); }, draw_uniform(-3, 3)));
  cases.push_back(unary("softmax_axis0", [](const Tensor& x) { return softmax(x, 0); }, draw_uniform(-3, 3)));

  cases.push_back({"concat", false, [](CounterRng& rng, std::size_t i) {
                     const std::size_t axis = i % 2;
                     Tensor a = uniform(rng, {2, 3}, -1, 1);
                     Tensor b = uniform(rng, axis == 0 ? Shape{1, 3} : Shape{2, 4}, -1, 1);
                     Probe p = probe_for(rng, concat({a.detach(), b.detach()}, axis).shape());
                     return Instance{[=] { return p(concat({a, b}, axis)); }, {a, b}, std::nullopt};
                   }});
  cases.push_back({"gather_rows", false, [](CounterRng& rng, std::size_t) {
                     Tensor table = uniform(rng, {5, 3}, -1, 1);
                     std::vector<std::size_t> idx(7);
                     for (auto& k : idx) k = rng.below(5);  // repeats exercise accumulation
                     Probe p = probe_for(rng, {7, 3});
                     return Instance{[=] { return p(gather_rows(table, idx)); }, {table}, std::nullopt};
                   }});
  cases.push_back({"matmul", false, [](CounterRng& rng, std::size_t i) {
                     Tensor a, b;
                     switch (i % 3) {
                       case 0:
                         a = uniform(rng, {3, 4}, -1, 1);
                         b = uniform(rng, {4, 2}, -1, 1);
                         break;
                       case 1:
                         a = uniform(rng, {2, 3, 4}, -1, 1);
                         b = uniform(rng, {2, 4, 2}, -1, 1);
                         break;
                       default:
                         a = uniform(rng, {2, 3, 4}, -1, 1);
                         b = uniform(rng, {4, 2}, -1, 1);
                     }
                     Probe p = probe_for(rng, matmul(a.detach(), b.detach()).shape());
                     return Instance{[=] { return p(matmul(a, b)); }, {a, b}, std::nullopt};
                   }});
  cases.push_back({"conv2d", false, [](CounterRng& rng, std::size_t i) {
                     const bool strided = i % 2 == 1;
                     Tensor x = uniform(rng, {2, 2, 5, 5}, -1, 1);
                     Tensor k = uniform(rng, {3, 2, 3, 3}, -1, 1);
                     Tensor bias = strided ? Tensor() : uniform(rng, {3}, -1, 1);
                     const std::size_t stride = strided ? 2 : 1;
                     const std::size_t pad = strided ? 0 : 1;
                     Probe p = probe_for(rng, conv2d(x.detach(), k.detach(), bias.defined() ? bias.detach() : Tensor(),
                                                     stride, pad)
                                                  .shape());
                     std::vector<Tensor> leaves{x, k};
                     if (bias.defined()) leaves.push_back(bias);
                     return Instance{[=] { return p(conv2d(x, k, bias, stride, pad)); }, leaves, std::nullopt};
                   }});
  cases.push_back({"upsample_nearest2x", false, [](CounterRng& rng, std::size_t) {
                     Tensor x = uniform(rng, {1, 2, 3, 2}, -1, 1);
                     Probe p = probe_for(rng, {1, 2, 6, 4});
                     return Instance{[=] { return p(upsample_nearest2x(x)); }, {x}, std::nullopt};
                   }});
  cases.push_back({"avg_pool2x2", false, [](CounterRng& rng, std::size_t) {
                     Tensor x = uniform(rng, {1, 2, 4, 6}, -1, 1);
                     Probe p = probe_for(rng, {1, 2, 2, 3});
                     return Instance{[=] { return p(avg_pool2x2(x)); }, {x}, std::nullopt};
                   }});
  cases.push_back({"group_norm", false, [](CounterRng& rng, std::size_t) {
                     Tensor x = uniform(rng, {2, 3, 2, 3}, -2, 2);
                     Tensor g = uniform(rng, {3}, 0.5, 1.5);
                     Tensor b = uniform(rng, {3}, -0.5, 0.5);
                     Probe p = probe_for(rng, {2, 3, 2, 3});
                     return Instance{[=] { return p(group_norm(x, g, b)); }, {x, g, b}, std::nullopt};
                   }});
  cases.push_back({"seg_loss", false, [](CounterRng& rng, std::size_t) {
                     Tensor probs = uniform(rng, {2, 3, 3, 3}, 0.05, 0.95);
                     std::vector<double> t(2 * 3 * 9, 0.0);
                     for (std::size_t b = 0; b < 2; ++b) {
                       for (std::size_t px = 0; px < 9; ++px) t[(b * 3 + rng.below(3)) * 9 + px] = 1.0;
                     }
                     Tensor truth = Tensor::from({2, 3, 3, 3}, std::move(t));
                     return Instance{[=] { return seg_loss(probs, truth); }, {probs}, std::nullopt};
                   }});
  cases.push_back({"codebook_loss", false, [](CounterRng& rng, std::size_t) {
                     Tensor z = uniform(rng, {1, 4, 3}, -1, 1, false);
                     Tensor zq = uniform(rng, {1, 4, 3}, -1, 1);
                     return Instance{[=] { return codebook_loss(z, zq); }, {zq}, std::nullopt};
                   }});
  cases.push_back({"commitment_loss", false, [](CounterRng& rng, std::size_t) {
                     Tensor z = uniform(rng, {1, 4, 3}, -1, 1);
                     Tensor zq = uniform(rng, {1, 4, 3}, -1, 1, false);
                     return Instance{[=] { return commitment_loss(z, zq, 0.25); }, {z}, std::nullopt};
                   }});
  cases.push_back({"quantize", false, [](CounterRng& rng, std::size_t) {
                     TokenMap z = random_tokens(rng, 1, 2, 2, 4);
                     Codebook book(uniform(rng, {6, 4}, -1, 1));
                     auto q = quantize(z, book, 0.25);
                     Probe p = probe_for(rng, q.z_q.tokens.shape());
                     return Instance{[=] { return p(quantize(z, book, 0.25).z_q.tokens); },
                                     {z.tokens, book.entries()},
                                     q.min_margin};
                   }});
  cases.push_back({"cross_attention", false, [](CounterRng& rng, std::size_t i) {
                     const std::size_t heads = i % 2 == 0 ? 1 : 2;
                     TokenMap q = random_tokens(rng, 2, 1, 3, 4);
                     TokenMap kv = random_tokens(rng, 2, 1, 3, 4);
                     AttentionParams params = AttentionParams::init(4, heads, rng);
                     Probe p = probe_for(rng, q.tokens.shape());
                     std::vector<Tensor> leaves{q.tokens, kv.tokens};
                     for (auto& w : params.parameters()) leaves.push_back(w);
                     return Instance{[=] { return p(mh_cross_attention(q, kv, params).output.tokens); }, leaves,
                                     std::nullopt};
                   }});
  cases.push_back({"hard_attention", false, [](CounterRng& rng, std::size_t i) {
                     const std::size_t heads = i % 2 == 0 ? 1 : 2;
                     TokenMap x = random_tokens(rng, 2, 2, 2, 4);
                     AttentionParams params = AttentionParams::init(4, heads, rng);
                     const double margin = hard_self_attention(x, params).min_margin;
                     Probe p = probe_for(rng, x.tokens.shape());
                     std::vector<Tensor> leaves{x.tokens};
                     for (auto& w : params.parameters()) leaves.push_back(w);
                     return Instance{[=] { return p(hard_self_attention(x, params).output.tokens); }, leaves, margin};
                   }});
  cases.push_back({"hard_attention_surrogate", false, [](CounterRng& rng, std::size_t) {
                     TokenMap x = random_tokens(rng, 1, 2, 2, 4);
                     AttentionParams params = AttentionParams::init(4, 2, rng);
                     Probe p = probe_for(rng, x.tokens.shape());
                     std::vector<Tensor> leaves{x.tokens};
                     for (auto& w : params.parameters()) leaves.push_back(w);
                     return Instance{[=] { return p(hard_self_attention(x, params, 0.5).output.tokens); }, leaves,
                                     std::nullopt};
                   }});
  return cases;
}

Case composed_case(const GradcheckOptions& o) {
  return {"bottleneck", true, [o](CounterRng& rng, std::size_t) {
            BottleneckConfig cfg = o.bottleneck;
            cfg.straight_through = false;
            BottleneckParams params = BottleneckParams::init(cfg, rng);
            TokenMap z = random_tokens(rng, 1, o.latent_height, o.latent_width, cfg.dim);
            const BottleneckOutput out = bottleneck_forward(z, params, cfg);
            Probe p = probe_for(rng, out.output.tokens.shape());
            std::vector<Tensor> leaves{z.tokens};
            for (auto& t : params.parameters()) leaves.push_back(t);
            const double margin = std::min(out.quant_margin, out.hard_margin);
            return Instance{[=] {
                              const auto y = bottleneck_forward(z, params, cfg);
                              if (y.indices != out.indices) throw ContractError("bottleneck: code assignment flipped");
                              return p(y.output.tokens);
                            },
                            leaves, margin};
          }};
}

}  // namespace

std::vector<std::string> gradcheck_case_names() {
  std::vector<std::string> names;
  for (const auto& c : elementary_cases()) names.push_back(c.name);
  names.push_back("bottleneck");
  return names;
}

std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckOptions& options) {
  if (!(options.eps > 0.0)) throw ContractError("gradcheck eps must be positive");
  options.bottleneck.validate();
  auto cases = elementary_cases();
  cases.push_back(composed_case(options));

  std::vector<GradcheckEntry> entries;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& kase = cases[c];
    GradcheckEntry e;
    e.name = kase.name;
    e.composed = kase.composed;
    CounterRng rng(options.seed ^ (0x100000000ULL * (c + 1)));
    for (std::size_t i = 0; i < options.instances; ++i) {
      Instance inst = kase.build(rng, i);
      std::size_t draws = 1;
      while (inst.margin && *inst.margin < options.margin_factor * options.eps) {
        if (draws++ >= kMaxDraws) {
          throw ContractError(kase.name + ": no instance with decision margin above " +
                              std::to_string(options.margin_factor * options.eps));
        }
        ++e.redrawn;
        inst = kase.build(rng, i);
      }
      const FdReport r = fd_check_params(inst.f, inst.leaves, options.eps);
      e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
      e.coordinates += r.coordinates;
      ++e.instances;
    }
    entries.push_back(e);
  }
  return entries;
}

}  // namespace synergy
