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

// Synthetic grayscale segmentation data: filled shapes on a dark background,
// one intensity band per class, Gaussian pixel noise.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synergy/metrics.hpp"
#include "synergy/rng.hpp"
#include "synergy/tensor.hpp"

namespace synergy {

enum class ShapeKind { kCircle, kEllipse, kRectangle };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& name);

struct SynthSpec {
  std::size_t image_size = 32;
  std::size_t num_classes = 4;
  std::size_t min_shapes = 1;
  std::size_t max_shapes = 3;
  double noise_std = 0.05;
  std::size_t min_radius = 3;
  std::size_t max_radius = 8;
  bool overlap_allowed = true;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::vector<ShapeKind> kinds{ShapeKind::kEllipse, ShapeKind::kRectangle};

  /// Throws ConfigError for geometry or class counts that cannot be generated.
  void validate() const;
};

/// Pixel intensity of a class before noise.
double class_intensity(std::size_t class_id);
inline constexpr double kIntensityStep = 0.15;

/// Geometry of one drawn shape. A pixel (x, y) is inside when
///   circle/ellipse: (x-cx)^2 ry^2 + (y-cy)^2 rx^2 <= rx^2 ry^2
///   rectangle:      |x-cx| <= rx and |y-cy| <= ry
struct ShapeRecord {
  ShapeKind kind = ShapeKind::kCircle;
  std::int32_t class_id = 1;
  std::int64_t cx = 0, cy = 0;
  std::int64_t rx = 0, ry = 0;

  bool contains(std::int64_t x, std::int64_t y) const;
};

struct Sample {
  Tensor image;  // 1 x H x W, values in [0, 1]
  LabelMap mask;
  std::vector<ShapeRecord> shapes;  // in draw order; empty after load
};

struct Dataset {
  SynthSpec spec;
  std::vector<Sample> samples;
};

/// Sample i is drawn from CounterRng(seed ^ i), so any subset can be
/// regenerated independently.
Sample generate_sample(const SynthSpec& spec, std::size_t index);
Dataset generate(const SynthSpec& spec);

enum class Augmentation { kIdentity, kHFlip, kVFlip, kRot90, kRot180, kRot270 };
inline constexpr std::size_t kAugmentationCount = 6;

/// Applies the same transform to image and mask. Rotations are clockwise.
Sample apply_augmentation(const Sample& sample, Augmentation kind);
LabelMap apply_augmentation(const LabelMap& mask, Augmentation kind);
/// Draws one of the six transforms uniformly from rng.
Sample augment(const Sample& sample, CounterRng& rng);

/// Pixel count per class over the dataset.
std::vector<std::size_t> class_pixel_counts(const Dataset& data);

/// Layout: manifest.json plus samples/NNNN.img (1 x H x W) and
/// samples/NNNN.msk (H x W labels stored as doubles), both tensor files.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
/// Throws IntegrityError naming the first file that is missing, malformed or
/// inconsistent with the manifest.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace synergy
