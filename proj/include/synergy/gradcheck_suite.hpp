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

// Finite-difference checks over every differentiable operation and over the
// composed bottleneck.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "synergy/bottleneck.hpp"

namespace synergy {

struct GradcheckOptions {
  double eps = 1e-4;
  std::uint64_t seed = 0;
  /// Random instances drawn per operation.
  std::size_t instances = 16;
  /// Bottleneck used for the composed check; straight_through is forced off
  /// so the analytic gradient is the true derivative of the forward map.
  BottleneckConfig bottleneck{.dim = 8, .codebook_size = 16, .cross_heads = 2, .refine_heads = 2};
  std::size_t latent_height = 2;
  std::size_t latent_width = 2;
  /// Instances whose argmin/argmax margin is below margin_factor * eps are
  /// redrawn, so no perturbation flips a discrete decision.
  double margin_factor = 100.0;
};

struct GradcheckEntry {
  std::string name;
  bool composed = false;
  double max_rel_error = 0.0;
  std::size_t instances = 0;
  std::size_t coordinates = 0;
  /// Instances redrawn because of small decision margins.
  std::size_t redrawn = 0;
};

std::vector<std::string> gradcheck_case_names();

/// Runs every case; throws ContractError if a margin-safe instance cannot be
/// found within a bounded number of draws.
std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckOptions& options);

}  // namespace synergy
