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

#include "synergy/tokens.hpp"

#include "synergy/errors.hpp"
#include "synergy/ops.hpp"

namespace synergy {

TokenMap TokenMap::wrap(Tensor tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 3 || tokens.dim(1) != height * width) {
    throw DimensionError("token map " + shape_str(tokens.shape()) + " does not match a " + std::to_string(height) +
                         "x" + std::to_string(width) + " grid");
  }
  return TokenMap{std::move(tokens), height, width};
}

TokenMap TokenMap::from_spatial(const Tensor& feature_map) {
  if (feature_map.rank() != 4) {
    throw DimensionError("from_spatial: expected [B x C x H x W], got " + shape_str(feature_map.shape()));
  }
  const auto b = feature_map.dim(0);
  const auto c = feature_map.dim(1);
  const auto h = feature_map.dim(2);
  const auto w = feature_map.dim(3);
  Tensor tokens = transpose(reshape(feature_map, {b, c, h * w}));
  return TokenMap{std::move(tokens), h, w};
}

Tensor TokenMap::to_spatial() const {
  const auto b = batch();
  const auto c = dim();
  return reshape(transpose(tokens), {b, c, height, width});
}

}  // namespace synergy
