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

#pragma once

#include <cstddef>

#include "synergy/tensor.hpp"

namespace synergy {

/// A latent feature map viewed as a token sequence: tokens is [B x T x dim]
/// with T == height * width, token t at spatial position (t / width, t % width).
struct TokenMap {
  Tensor tokens;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t batch() const { return tokens.dim(0); }
  std::size_t count() const { return tokens.dim(1); }
  std::size_t dim() const { return tokens.dim(2); }

  /// Wraps a [B x T x dim] tensor; validates T == height * width.
  static TokenMap wrap(Tensor tokens, std::size_t height, std::size_t width);
  /// [B x C x H x W] -> tokens [B x HW x C] (differentiable).
  static TokenMap from_spatial(const Tensor& feature_map);
  /// tokens [B x HW x C] -> [B x C x H x W] (differentiable).
  Tensor to_spatial() const;
};

}  // namespace synergy
