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

#ifndef STARLK_NN_TENSOR_HPP_
#define STARLK_NN_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace starlk::nn {

using Shape = std::vector<std::int64_t>;

std::int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

/// Engine-wide numeric precision.
///
/// Values are always held in `double` storage. In kTrain mode every value an
/// operator produces (and every accumulated leaf gradient) is rounded to the
/// nearest binary32, so results are exactly those of a 32-bit pipeline that
/// accumulates in 64-bit. kTest keeps full 64-bit values for gradient checks.
enum class Precision { kTest, kTrain };

void SetPrecision(Precision precision);
Precision CurrentPrecision();
/// Rounds in place according to CurrentPrecision().
void RoundToPrecision(std::span<double> values);

/// Scoped switch; restores the previous precision on destruction.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(Precision precision);
  ~PrecisionGuard();
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  Precision previous_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool retain_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads `self.grad` and accumulates into the parents' gradients.
  std::function<void(Node& self)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& EnsureGrad();
};

}  // namespace detail

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage and graph node,
/// the way parameters are shared between a layer and its model's registry.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor Zeros(const Shape& shape, bool requires_grad = false);
  static Tensor Full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor FromData(const Shape& shape, std::vector<double> values,
                         bool requires_grad = false);
  static Tensor Scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t numel() const;

  std::span<const double> data() const;
  /// Direct write access. Only meaningful on leaves; mutating a tensor that
  /// has already been consumed by a recorded op invalidates that op's backward.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  /// Empty span when no gradient has reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Gradient values, or zeros when none were accumulated.
  std::vector<double> GradOrZeros() const;
  void ZeroGrad();
  /// Keep the gradient of a non-leaf tensor after Backward().
  void RetainGrad();

  /// Runs reverse-mode accumulation from this scalar. The recorded graph is
  /// released afterwards; calling Backward() on it again throws.
  void Backward() const;

  /// Copy of the values with no graph attached.
  Tensor Detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  const detail::Node& checked() const;
  detail::Node& checked();

  std::shared_ptr<detail::Node> node_;
};

/// Creates the output of a differentiable op. The node records `parents` and
/// `backward_fn` only when grad mode is on and some parent requires grad.
Tensor MakeResult(Shape shape, std::vector<double> value,
                  std::vector<Tensor> parents,
                  std::function<void(detail::Node& self)> backward_fn);

}  // namespace starlk::nn

#endif  // STARLK_NN_TENSOR_HPP_
