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

#include "synergy/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "synergy/errors.hpp"

namespace synergy {

namespace {
thread_local bool g_grad_enabled = true;

ImplPtr new_impl(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return impl;
}
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_impl({}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const double> Tensor::data() const { return impl_->data; }

std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank mismatch for " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return impl_->grad_fn == nullptr; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(new_impl(shape(), impl_->data, false)); }

Graph Graph::trace(const Tensor& root) {
  Graph g;
  if (!root.defined() || !root.impl()->grad_fn) return g;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<const TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root.impl().get(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& inputs = node->grad_fn->inputs;
    if (next < inputs.size()) {
      TensorImpl* child = inputs[next++].get();
      if (child->grad_fn && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    g.nodes_.push_back(node);
    stack.pop_back();
  }
  return g;
}

std::vector<std::string> Graph::operation_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (auto* n : nodes_) names.push_back(n->grad_fn->name);
  return names;
}

void Tensor::backward() const {
  if (!defined() || numel() != 1) {
    throw ContractError("backward() requires a single-element root, got " +
                        (defined() ? shape_str(shape()) : std::string("<undefined>")));
  }
  if (!impl_->requires_grad) throw ContractError("backward() root is not on a gradient graph");
  if (!impl_->grad_fn) {
    if (impl_->grad.empty()) impl_->grad.assign(1, 0.0);
    impl_->grad[0] += 1.0;
    return;
  }

  const Graph graph = Graph::trace(*this);
  for (auto* n : graph.nodes()) n->grad.clear();
  impl_->grad.assign(1, 1.0);

  std::vector<std::vector<double>*> slots;
  const auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->grad.empty()) continue;  // no path from the root reached it
    const auto& inputs = node->grad_fn->inputs;
    slots.assign(inputs.size(), nullptr);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      TensorImpl* in = inputs[i].get();
      if (!in->requires_grad) continue;
      if (in->grad.size() != in->data.size()) in->grad.assign(in->data.size(), 0.0);
      slots[i] = &in->grad;
    }
    node->grad_fn->backward(*node, slots);
  }
  for (auto* n : nodes) {
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

Tensor make_op(std::string name, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
               BackwardFn backward) {
  auto impl = new_impl(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return Tensor(impl);
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return Tensor(impl);
  auto fn = std::make_shared<GradFn>();
  fn->name = std::move(name);
  fn->inputs.reserve(inputs.size());
  for (auto& t : inputs) fn->inputs.push_back(t.impl());
  fn->backward = std::move(backward);
  impl->requires_grad = true;
  impl->grad_fn = std::move(fn);
  return Tensor(impl);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

long first_non_finite(const Tensor& t) {
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) return static_cast<long>(i);
  }
  return -1;
}

}  // namespace synergy
