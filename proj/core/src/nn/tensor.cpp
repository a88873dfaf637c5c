// Copyright 2026 The StarLK Authors
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

#include "starlk/nn/tensor.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace starlk::nn {
namespace {

Precision g_precision = Precision::kTest;
thread_local bool t_grad_enabled = true;

}  // namespace

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) {
    if (extent < 0) throw std::invalid_argument("negative extent in shape " + ShapeString(shape));
    n *= extent;
  }
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void SetPrecision(Precision precision) { g_precision = precision; }
Precision CurrentPrecision() { return g_precision; }

void RoundToPrecision(std::span<double> values) {
  if (g_precision != Precision::kTrain) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

PrecisionGuard::PrecisionGuard(Precision precision) : previous_(g_precision) {
  g_precision = precision;
}
PrecisionGuard::~PrecisionGuard() { g_precision = previous_; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool GradEnabled() { return t_grad_enabled; }

std::vector<double>& detail::Node::EnsureGrad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::Zeros(const Shape& shape, bool requires_grad) {
  return Full(shape, 0.0, requires_grad);
}

Tensor Tensor::Full(const Shape& shape, double value, bool requires_grad) {
  return FromData(shape, std::vector<double>(NumElements(shape), value), requires_grad);
}

Tensor Tensor::FromData(const Shape& shape, std::vector<double> values, bool requires_grad) {
  if (static_cast<std::int64_t>(values.size()) != NumElements(shape)) {
    throw std::invalid_argument("data length " + std::to_string(values.size()) +
                                " does not match shape " + ShapeString(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::Scalar(double value) { return FromData({}, {value}); }

const detail::Node& Tensor::checked() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

detail::Node& Tensor::checked() {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " +
                            ShapeString(s));
  }
  return s[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(checked().value.size()); }

std::span<const double> Tensor::data() const { return checked().value; }
std::span<double> Tensor::mutable_data() { return checked().value; }

double Tensor::item() const {
  const auto& n = checked();
  if (n.value.size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + ShapeString(n.shape));
  }
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
void Tensor::set_requires_grad(bool value) { checked().requires_grad = value; }
bool Tensor::has_grad() const { return !checked().grad.empty(); }
std::span<const double> Tensor::grad() const { return checked().grad; }
std::span<double> Tensor::mutable_grad() { return checked().EnsureGrad(); }

std::vector<double> Tensor::GradOrZeros() const {
  const auto& n = checked();
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

void Tensor::ZeroGrad() { checked().grad.clear(); }
void Tensor::RetainGrad() { checked().retain_grad = true; }

Tensor Tensor::Detach() const {
  const auto& n = checked();
  return FromData(n.shape, n.value);
}

void Tensor::Backward() const {
  const auto& root = checked();
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got shape " +
                                ShapeString(root.shape));
  }
  if (root.consumed) {
    throw std::logic_error("backward() called twice on the same graph; re-run the forward pass");
  }
  if (!root.requires_grad) {
    throw std::logic_error("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS; deep models overflow a recursive walk.
  // Owning handles: releasing a node's parents below must not free nodes
  // that are still waiting in `order`.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      std::shared_ptr<detail::Node> parent = node->parents[next++];
      if (parent->requires_grad && visited.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->EnsureGrad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node& node = **it;
    if (node.is_leaf()) {
      RoundToPrecision(node.grad);
      continue;
    }
    if (!node.grad.empty()) node.backward_fn(node);
    node.backward_fn = nullptr;
    node.parents.clear();
    node.consumed = true;
    if (!node.retain_grad) {
      node.grad.clear();
      node.grad.shrink_to_fit();
    }
  }
}

Tensor MakeResult(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                  std::function<void(detail::Node& self)> backward_fn) {
  RoundToPrecision(value);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (GradEnabled()) {
    for (const auto& p : parents) needs = needs || (p.defined() && p.requires_grad());
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
      if (p.defined()) {
        if (p.node()->consumed) {
          throw std::logic_error("op consumes a tensor whose graph was already released");
        }
        node->parents.push_back(p.node());
      }
    }
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace starlk::nn
