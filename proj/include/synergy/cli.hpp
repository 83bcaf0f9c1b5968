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

// Command-line surface. Every command writes newline-delimited JSON to `out`
// and a human-readable summary to `err`.
//
// Exit codes: 0 success, 1 validation error, 2 non-finite numbers,
// 3 gradient check above tolerance.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "synergy/config.hpp"
#include "synergy/train.hpp"

namespace synergy {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitTolerance = 3;

/// Run configuration file:
///   {"model": {...}, "optimizer": {"lr", "momentum", "weight_decay",
///    "batch_size", "epochs", "augment"}, "train_data": dir,
///    "val_data": dir (optional), "seed": n}
/// Paths are relative to the file's directory. run.seed overrides model.seed.
struct RunConfig {
  ModelConfig model;
  SgdOptions sgd;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  bool augment = true;
  std::filesystem::path train_data;
  std::optional<std::filesystem::path> val_data;
  std::uint64_t seed = 0;

  /// Throws ConfigError on lr <= 0, batch_size 0, missing data directories.
  void validate() const;
  TrainOptions train_options() const;
};

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir);
Json to_json(const RunConfig& config);
/// Reads and validates; with require_data false the data paths are optional.
RunConfig load_run_config(const std::filesystem::path& path, bool require_data = true);

/// Metric report: means, class-wise DSC/HD95 and per-case rows.
Json metrics_report(const MetricSummary& summary);
Json epoch_json(const EpochReport& report);

/// Trains into out_dir (checkpoint/, epochs.jsonl, config.json). A run with
/// zero epochs still writes the initial checkpoint.
std::vector<EpochReport> run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                                      std::ostream& out, std::ostream& err);

/// Evaluates a checkpoint on a dataset and writes the report file.
Json run_evaluation(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                    const std::filesystem::path& report_path, std::ostream& out, std::ostream& err);

inline const std::vector<std::string> kAblationAxes{"K", "dim", "heads", "fusion", "depth"};

/// One sweep point: value label plus the run configuration it produces.
struct AblationPoint {
  std::string value;
  RunConfig config;
};

/// Throws ConfigError on an unknown axis or malformed value.
std::vector<AblationPoint> ablation_points(const RunConfig& base, const std::string& axis,
                                           const std::vector<std::string>& values);

/// Runs each point (train + eval) under out_dir/<axis>-<value>/ and writes
/// out_dir/ablation.json. Returns the consolidated report.
Json run_ablation(const RunConfig& base, const std::string& axis, const std::vector<std::string>& values,
                  const std::filesystem::path& out_dir, bool parallel, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace synergy
