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
#include <functional>
#include <vector>

#include "synergy/tensor.hpp"

namespace synergy {

/// Max over coordinates of |analytic - central| / max(1, |analytic|), where
/// central = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). `f` must return a
/// single-element tensor and be deterministic.
double fd_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps);

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Multi-input variant: `params` are leaves captured by `f`; each coordinate
/// is perturbed in place and restored bitwise afterwards.
FdReport fd_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params, double eps);

}  // namespace synergy
