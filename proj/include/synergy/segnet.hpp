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

// Encoder / bottleneck / decoder segmentation network.
//
//   encoder stage i : [conv3x3-GN-ReLU] x2 at resolution H/2^i, then 2x2 avg pool
//   pre-quant       : conv3x3-GN-ReLU (c_last -> dim), conv3x3 (dim -> dim)
//   bottleneck      : see bottleneck.hpp, on the H/2^s x W/2^s token grid
//   post-bottleneck : conv3x3-GN-ReLU (dim -> dim), conv3x3-GN-ReLU (dim -> c_last)
//   decoder stage i : nearest 2x upsample, optional skip concat with encoder
//                     stage i, [conv3x3-GN-ReLU] x2; stages run i = s-1 .. 0
//   head            : conv1x1 to num_classes logits

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "synergy/bottleneck.hpp"
#include "synergy/metrics.hpp"
#include "synergy/rng.hpp"
#include "synergy/tensor.hpp"

namespace synergy {

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t num_classes = 4;
  std::vector<std::size_t> encoder_channels{8, 16, 32};
  std::size_t dim = 32;
  std::size_t codebook_size = 64;
  std::size_t cross_heads = 2;   // h_s
  std::size_t refine_heads = 2;  // h_h
  bool use_skips = true;
  /// false selects the plain-fusion variant (z_f = z_q + z_con).
  bool use_disconx = true;
  double beta = 0.25;
  /// Weight of the quantization loss in the total loss.
  double quant_weight = 1.0;
  double hard_temperature = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  BottleneckConfig bottleneck() const;
  std::size_t downsample_factor() const { return std::size_t{1} << encoder_channels.size(); }
};

struct ConvBlock {
  Tensor weight;  // O x C x k x k
  Tensor bias;    // O
  Tensor gamma;   // O, undefined for a plain convolution
  Tensor beta;    // O
  std::size_t padding = 1;

  Tensor forward(const Tensor& x) const;
};

struct Stage {
  ConvBlock first;
  ConvBlock second;
};

using NamedTensor = std::pair<std::string, Tensor>;

struct SegModel {
  ModelConfig config;
  std::vector<Stage> encoder;
  Stage pre_quant;
  BottleneckParams bottleneck;
  Stage post;
  /// decoder[j] runs at the resolution of encoder stage s-1-j.
  std::vector<Stage> decoder;
  ConvBlock head;

  /// Deterministic initialization from config.seed. Draw order: encoder
  /// stages, pre-quant block, codebook, cross-attention, refinement,
  /// post block, decoder stages, head; weights only (biases 0, gamma 1).
  static SegModel init(const ModelConfig& config);

  /// Stable names ("encoder.0.first.weight", ...) in draw order.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
};

/// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const ModelConfig& config);
std::size_t count_parameters(const SegModel& model);

struct ForwardResult {
  Tensor logits;
  Tensor quant_loss;
  std::vector<std::size_t> indices;
  TokenMap latent;
  BottleneckOutput bottleneck;
};

/// images: [B x in_channels x H x W]; H and W must be multiples of 2^stages.
ForwardResult forward(const SegModel& model, const Tensor& images);

inline constexpr double kProbabilityFloor = 1e-7;

/// sigmoid(logits) clamped to [floor, 1 - floor] so the BCE stays finite.
Tensor class_probabilities(const Tensor& logits);

/// Per-pixel argmax over the class axis (ties to the lowest class).
std::vector<LabelMap> predict_labels(const Tensor& logits);

}  // namespace synergy
