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

#include "synergy/segnet.hpp"

#include <algorithm>
#include <cmath>

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

void ModelConfig::validate() const {
  if (in_channels == 0) throw ConfigError("in_channels must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (encoder_channels.empty()) throw ConfigError("encoder_channels must be non-empty");
  if (std::find(encoder_channels.begin(), encoder_channels.end(), 0) != encoder_channels.end()) {
    throw ConfigError("encoder channel counts must be positive");
  }
  if (codebook_size < 2) throw ConfigError("codebook size K must be >= 2");
  const std::size_t widest = std::max({cross_heads, refine_heads, std::size_t{1}});
  if (dim == 0 || dim % widest != 0) {
    throw ConfigError("dim (" + std::to_string(dim) + ") must be divisible by max(h_s, h_h, 1) = " +
                      std::to_string(widest));
  }
  if (quant_weight < 0.0) throw ConfigError("quant_weight must be non-negative");
  bottleneck().validate();
}

BottleneckConfig ModelConfig::bottleneck() const {
  BottleneckConfig b;
  b.dim = dim;
  b.codebook_size = codebook_size;
  b.cross_heads = cross_heads;
  b.refine_heads = refine_heads;
  b.beta = beta;
  b.use_disconx = use_disconx;
  b.hard_temperature = hard_temperature;
  return b;
}

Tensor ConvBlock::forward(const Tensor& x) const {
  Tensor y = conv2d(x, weight, bias, 1, padding);
  if (!gamma.defined()) return y;
  return relu(group_norm(y, gamma, beta));
}

namespace {

ConvBlock make_conv(std::size_t in, std::size_t out, std::size_t k, bool normalized, CounterRng& rng,
                    double bound) {
  ConvBlock c;
  std::vector<double> w(out * in * k * k);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  c.weight = Tensor::from({out, in, k, k}, std::move(w), true);
  c.bias = Tensor::zeros({out}, true);
  if (normalized) {
    c.gamma = Tensor::full({out}, 1.0, true);
    c.beta = Tensor::zeros({out}, true);
  }
  c.padding = k / 2;
  return c;
}

// He-uniform bound for a ReLU-followed convolution.
double he_bound(std::size_t in, std::size_t k) { return std::sqrt(6.0 / static_cast<double>(in * k * k)); }

ConvBlock conv3x3(std::size_t in, std::size_t out, bool normalized, CounterRng& rng) {
  return make_conv(in, out, 3, normalized, rng, he_bound(in, 3));
}

void append(std::vector<NamedTensor>& out, const std::string& prefix, const ConvBlock& c) {
  out.emplace_back(prefix + ".weight", c.weight);
  out.emplace_back(prefix + ".bias", c.bias);
  if (c.gamma.defined()) {
    out.emplace_back(prefix + ".gamma", c.gamma);
    out.emplace_back(prefix + ".beta", c.beta);
  }
}

void append(std::vector<NamedTensor>& out, const std::string& prefix, const Stage& s) {
  append(out, prefix + ".first", s.first);
  append(out, prefix + ".second", s.second);
}

std::size_t conv_count(std::size_t in, std::size_t out, std::size_t k, bool normalized) {
  return out * in * k * k + out + (normalized ? 2 * out : 0);
}

}  // namespace

SegModel SegModel::init(const ModelConfig& config) {
  config.validate();
  CounterRng rng(config.seed);
  SegModel m;
  m.config = config;
  const auto& ch = config.encoder_channels;
  const std::size_t stages = ch.size();

  std::size_t in = config.in_channels;
  for (std::size_t i = 0; i < stages; ++i) {
    Stage s;
    s.first = conv3x3(in, ch[i], true, rng);
    s.second = conv3x3(ch[i], ch[i], true, rng);
    m.encoder.push_back(std::move(s));
    in = ch[i];
  }
  m.pre_quant.first = conv3x3(ch.back(), config.dim, true, rng);
  m.pre_quant.second = conv3x3(config.dim, config.dim, false, rng);
  m.bottleneck = BottleneckParams::init(config.bottleneck(), rng);
  m.post.first = conv3x3(config.dim, config.dim, true, rng);
  m.post.second = conv3x3(config.dim, ch.back(), true, rng);

  std::size_t prev = ch.back();
  for (std::size_t j = 0; j < stages; ++j) {
    const std::size_t i = stages - 1 - j;
    const std::size_t skip = config.use_skips ? ch[i] : 0;
    Stage s;
    s.first = conv3x3(prev + skip, ch[i], true, rng);
    s.second = conv3x3(ch[i], ch[i], true, rng);
    m.decoder.push_back(std::move(s));
    prev = ch[i];
  }
  m.head = make_conv(ch.front(), config.num_classes, 1, false, rng,
                     1.0 / std::sqrt(static_cast<double>(ch.front())));
  return m;
}

std::vector<NamedTensor> SegModel::named_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < encoder.size(); ++i) append(out, "encoder." + std::to_string(i), encoder[i]);
  append(out, "pre_quant", pre_quant);
  out.emplace_back("bottleneck.codebook", bottleneck.codebook.entries());
  const char* names[] = {"w_query", "w_key", "w_value", "w_out"};
  if (bottleneck.cross) {
    auto p = bottleneck.cross->parameters();
    for (std::size_t k = 0; k < 4; ++k) out.emplace_back(std::string("bottleneck.cross.") + names[k], p[k]);
  }
  if (bottleneck.refine) {
    auto p = bottleneck.refine->parameters();
    for (std::size_t k = 0; k < 4; ++k) out.emplace_back(std::string("bottleneck.refine.") + names[k], p[k]);
  }
  append(out, "post", post);
  for (std::size_t j = 0; j < decoder.size(); ++j) append(out, "decoder." + std::to_string(j), decoder[j]);
  append(out, "head", head);
  return out;
}

std::vector<Tensor> SegModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t expected_parameter_count(const ModelConfig& config) {
  const auto& ch = config.encoder_channels;
  const std::size_t d = config.dim;
  std::size_t n = 0;
  std::size_t in = config.in_channels;
  for (auto c : ch) {
    n += conv_count(in, c, 3, true) + conv_count(c, c, 3, true);
    in = c;
  }
  n += conv_count(ch.back(), d, 3, true) + conv_count(d, d, 3, false);
  n += config.codebook_size * d;
  if (config.use_disconx) n += 4 * d * d;
  if (config.refine_heads > 0) n += 4 * d * d;
  n += conv_count(d, d, 3, true) + conv_count(d, ch.back(), 3, true);
  std::size_t prev = ch.back();
  for (std::size_t j = 0; j < ch.size(); ++j) {
    const std::size_t c = ch[ch.size() - 1 - j];
    n += conv_count(prev + (config.use_skips ? c : 0), c, 3, true) + conv_count(c, c, 3, true);
    prev = c;
  }
  n += conv_count(ch.front(), config.num_classes, 1, false);
  return n;
}

std::size_t count_parameters(const SegModel& model) {
  std::size_t n = 0;
  for (auto& t : model.parameters()) n += t.numel();
  return n;
}

ForwardResult forward(const SegModel& model, const Tensor& images) {
  const auto& cfg = model.config;
  if (images.rank() != 4 || images.dim(1) != cfg.in_channels) {
    throw ConfigError("forward: expected [B x " + std::to_string(cfg.in_channels) + " x H x W] images, got " +
                      shape_str(images.shape()));
  }
  const std::size_t factor = cfg.downsample_factor();
  if (images.dim(2) % factor != 0 || images.dim(3) % factor != 0) {
    throw ConfigError("forward: spatial size " + std::to_string(images.dim(2)) + "x" + std::to_string(images.dim(3)) +
                      " not divisible by " + std::to_string(factor));
  }

  std::vector<Tensor> skips;
  Tensor x = images;
  for (const auto& stage : model.encoder) {
    x = stage.second.forward(stage.first.forward(x));
    skips.push_back(x);
    x = avg_pool2x2(x);
  }
  Tensor z = model.pre_quant.second.forward(model.pre_quant.first.forward(x));

  ForwardResult result;
  result.latent = TokenMap::from_spatial(z);
  result.bottleneck = bottleneck_forward(result.latent, model.bottleneck, cfg.bottleneck());
  result.quant_loss = result.bottleneck.quant_loss;
  result.indices = result.bottleneck.indices;

  x = result.bottleneck.output.to_spatial();
  x = model.post.second.forward(model.post.first.forward(x));
  for (std::size_t j = 0; j < model.decoder.size(); ++j) {
    x = upsample_nearest2x(x);
    if (cfg.use_skips) x = concat({x, skips[skips.size() - 1 - j]}, 1);
    x = model.decoder[j].second.forward(model.decoder[j].first.forward(x));
  }
  result.logits = model.head.forward(x);
  return result;
}

Tensor class_probabilities(const Tensor& logits) {
  return clamp(sigmoid(logits), kProbabilityFloor, 1.0 - kProbabilityFloor);
}

std::vector<LabelMap> predict_labels(const Tensor& logits) {
  if (logits.rank() != 4) throw DimensionError("predict_labels: expected rank-4 logits, got " + shape_str(logits.shape()));
  const std::size_t b = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  const auto d = logits.data();
  std::vector<LabelMap> out;
  for (std::size_t n = 0; n < b; ++n) {
    LabelMap m(h, w);
    for (std::size_t p = 0; p < h * w; ++p) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k) {
        if (d[(n * c + k) * h * w + p] > d[(n * c + best) * h * w + p]) best = k;
      }
      m.labels[p] = static_cast<std::int32_t>(best);
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace synergy
