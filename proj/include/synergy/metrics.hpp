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

// Segmentation training loss and evaluation metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "synergy/tensor.hpp"

namespace synergy {

inline constexpr double kDiceSmoothing = 1e-6;

/// BCE(probs, truth) + (1 - softDice), with softDice averaged over classes
/// (axis 1) and each class summed over batch and pixels. probs must lie
/// strictly inside (0, 1); truth is a {0,1} one-hot tensor of the same shape.
Tensor seg_loss(const Tensor& probs, const Tensor& truth_onehot);

/// Integer label map, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0) : height(h), width(w), labels(h * w, fill) {}
  std::int32_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::int32_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  bool operator==(const LabelMap&) const = default;
};

struct MaskPair {
  LabelMap pred;
  LabelMap truth;
  std::size_t num_classes = 2;

  /// Throws DimensionError/DomainError on shape or label violations.
  void validate() const;
};

/// [H x W] labels -> [num_classes x H x W] one-hot values.
std::vector<double> one_hot(const LabelMap& labels, std::size_t num_classes);

struct DiceResult {
  double value = 0.0;
  /// Class absent from both masks; value is then 1 by convention.
  bool vacuous = false;
};

DiceResult dice_score(const MaskPair& pair, std::int32_t class_id);

/// Pixels of the class with a 4-neighbour outside the class; positions off
/// the image count as outside.
std::vector<std::size_t> boundary_pixels(const LabelMap& map, std::int32_t class_id);

/// Symmetric percentile Hausdorff distance between class boundaries (pixel
/// units): max of both directed nearest-rank percentiles of boundary-to-
/// boundary minimum distances. nullopt when the class is empty in either mask.
std::optional<double> hausdorff_percentile(const MaskPair& pair, std::int32_t class_id, double percentile);
std::optional<double> hausdorff95(const MaskPair& pair, std::int32_t class_id);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct ConfusionMetrics {
  ConfusionCounts counts;
  std::optional<double> iou, se, sp, acc;  // nullopt on zero denominators
};

ConfusionMetrics confusion_metrics(const MaskPair& pair, std::int32_t class_id);

/// Per-case, per-class metric rows plus class-wise and overall means.
/// Means cover foreground classes (1..C-1) and skip cases where the class is
/// absent from ground truth; the number skipped is reported.
struct ClassMetrics {
  std::int32_t class_id = 0;
  bool present_in_truth = false;
  DiceResult dice;
  std::optional<double> hd95;
  ConfusionMetrics confusion;
};

struct CaseMetrics {
  std::vector<ClassMetrics> classes;
};

struct MetricSummary {
  std::vector<CaseMetrics> cases;
  std::size_t num_classes = 0;
  /// Indexed by class id; nullopt when the class never appears in truth.
  std::vector<std::optional<double>> class_dice;
  std::vector<std::optional<double>> class_hd95;
  std::optional<double> mean_dice, mean_hd95, mean_iou, mean_se, mean_sp, mean_acc;
  std::size_t excluded_absent = 0;
  std::size_t hd95_missing = 0;
};

MetricSummary summarize_metrics(const std::vector<MaskPair>& pairs);

}  // namespace synergy
