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

// Optimizer, training step, checkpoints and evaluation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "synergy/metrics.hpp"
#include "synergy/rng.hpp"
#include "synergy/segnet.hpp"
#include "synergy/synth.hpp"

namespace synergy {

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v.
/// An empty grad counts as zero.
void sgd_momentum_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                         const SgdOptions& options);

class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, SgdOptions options);

  /// Applies one update from the current .grad of every parameter.
  void step();
  void zero_grad();

  const SgdOptions& options() const { return options_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }
  /// Replaces the momentum buffers (checkpoint restore); sizes must match.
  void set_velocity(std::vector<std::vector<double>> velocity);

 private:
  std::vector<Tensor> params_;
  SgdOptions options_;
  std::vector<std::vector<double>> velocity_;
};

struct Batch {
  Tensor images;  // B x C x H x W
  std::vector<LabelMap> masks;
};

Batch make_batch(const std::vector<Sample>& samples);

/// [B x num_classes x H x W] one-hot targets.
Tensor one_hot_targets(const std::vector<LabelMap>& masks, std::size_t num_classes);

struct LossReport {
  double total = 0.0;
  double seg = 0.0;
  double quant = 0.0;
  std::vector<std::size_t> code_indices;  // codebook assignments of the step
};

struct LossTerms {
  ForwardResult forward;
  Tensor seg;
  Tensor total;
};
/// total = seg_loss(class_probabilities(logits)) + quant_weight * quant_loss.
/// Throws NumericError when logits or quant_loss are non-finite.
LossTerms compute_loss(const SegModel& model, const Batch& batch);

/// One forward, backward and optimizer update. Throws NumericError naming the
/// first non-finite tensor (loss terms, then parameter gradients); parameters
/// are left untouched in that case.
LossReport train_step(SegModel& model, const Batch& batch, SgdMomentum& optimizer);

struct Checkpoint {
  SegModel model;
  std::vector<std::vector<double>> velocity;
  SgdOptions optimizer;
  std::size_t step = 0;
  std::size_t epoch = 0;
  CounterRng::State rng_state;
};

/// Directory layout: manifest.json, params/<name>.syt, momentum/<name>.syt.
/// The directory is written next to `dir` and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Forward passes without gradient tracking, batch_size samples at a time.
std::vector<LabelMap> predict(const SegModel& model, const std::vector<Sample>& samples, std::size_t batch_size);
MetricSummary evaluate(const SegModel& model, const std::vector<Sample>& samples, std::size_t batch_size);

struct TrainOptions {
  SgdOptions sgd;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  bool augment = true;
  std::uint64_t seed = 0;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;     // batch means
  double seg = 0.0;
  double quant = 0.0;
  double codebook_perplexity = 0.0;
  double codebook_utilization = 0.0;
  std::optional<double> val_dsc;
};

/// Shuffles with a generator seeded from options.seed, augments each sample,
/// and calls on_epoch after every epoch (with the checkpoint of that epoch).
std::vector<EpochReport> fit(SegModel& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                             const TrainOptions& options,
                             const std::function<void(const EpochReport&, const Checkpoint&)>& on_epoch = {});

}  // namespace synergy
