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

// Dense f64 tensors with dynamic reverse-mode differentiation.
//
// Every differentiable operation produces a Tensor whose impl records a GradFn
// (name, input handles, backward closure). The graph lives as long as the
// root handle does; backward() sorts it topologically, walks it once in
// reverse, accumulates into leaf gradients and then drops the intermediate
// gradient buffers.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace synergy {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

/// Backward rule of one recorded operation. `out` is the node being
/// processed: out.data holds the forward values, out.grad the upstream
/// gradient. `grad_in[i]` is null when input i does not need a gradient;
/// otherwise it is a buffer of the input's size that the rule adds into.
using BackwardFn =
    std::function<void(const TensorImpl& out, std::span<std::vector<double>* const> grad_in)>;

struct GradFn {
  std::string name;
  std::vector<ImplPtr> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
  std::shared_ptr<GradFn> grad_fn;  // null for leaves
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(ImplPtr impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view of the values; only meaningful on leaves (parameters,
  /// inputs being perturbed by a finite-difference probe).
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// New leaf holding a copy of the values, detached from any graph.
  Tensor detach() const;
  /// Reverse-mode pass from a single-element root. Leaf gradients accumulate
  /// across calls until zero_grad().
  void backward() const;

  const ImplPtr& impl() const { return impl_; }

 private:
  ImplPtr impl_;
};

/// Topologically ordered view of the operations reachable from a root.
class Graph {
 public:
  static Graph trace(const Tensor& root);

  /// Non-leaf nodes, every node after all of its inputs.
  const std::vector<TensorImpl*>& nodes() const { return nodes_; }
  std::vector<std::string> operation_names() const;

 private:
  std::vector<TensorImpl*> nodes_;
};

/// Records an operation result. The result joins the graph only when grad
/// mode is on and at least one input requires a gradient.
Tensor make_op(std::string name, Shape shape, std::vector<double> values,
               std::vector<Tensor> inputs, BackwardFn backward);

/// Thread-local switch that disables graph recording.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

/// Index of the first non-finite value, or -1 when all values are finite.
long first_non_finite(const Tensor& t);

}  // namespace synergy
