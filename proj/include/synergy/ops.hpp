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

// Differentiable operations. Binary pointwise ops broadcast only when one
// operand is a single element or its shape is a trailing suffix of the
// other's; anything else throws DimensionError.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "synergy/tensor.hpp"

namespace synergy {

// Pointwise binary.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Pointwise unary.
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
/// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

// Reductions to a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Layout. reshape and transpose copy; no views exist.
Tensor reshape(const Tensor& x, Shape shape);
/// Swaps the last two axes (rank >= 2).
Tensor transpose(const Tensor& x);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// out[n] = table[indices[n]] for a rank-2 table; result is [N x cols].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
/// Same values, no gradient path.
Tensor stop_gradient(const Tensor& x);

/// Rank-2 x rank-2, rank-3 x rank-3 (batched) or rank-3 x rank-2 (shared rhs).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& x, std::size_t axis);

/// Cross-correlation of [B x C x H x W] with [O x C x kh x kw]; `bias` may be
/// undefined or hold O values.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);
Tensor upsample_nearest2x(const Tensor& input);
Tensor avg_pool2x2(const Tensor& input);
/// Single-group normalization over all non-batch axes, then per-channel
/// affine (gamma, beta of length C, channel axis 1).
Tensor group_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

}  // namespace synergy
