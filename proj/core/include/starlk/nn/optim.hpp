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

#ifndef STARLK_NN_OPTIM_HPP_
#define STARLK_NN_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "starlk/nn/tensor.hpp"

namespace starlk::nn {

/// A trainable tensor with its registry name. Norm scales/shifts and biases
/// are exempt from weight decay.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool weight_decay_exempt = false;
};

enum class OptimizerKind { kSgdMomentum, kAdam };

std::string ToString(OptimizerKind kind);
OptimizerKind ParseOptimizerKind(const std::string& text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgdMomentum;
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class OptimizerState {
 public:
  OptimizerState(OptimizerConfig config, std::span<const Parameter> params);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }

  /// Momentum buffers (SGD) or first moments (Adam), one per parameter.
  std::vector<std::vector<double>>& first() { return first_; }
  std::vector<std::vector<double>>& second() { return second_; }

  void Validate(std::span<const Parameter> params) const;
  void Advance() { ++step_; }

 private:
  OptimizerConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Heavy-ball SGD with coupled L2 decay: g' = g + wd*p, v = mu*v + g',
/// p -= lr*v. Missing gradients count as zero. Throws before touching any
/// parameter if a gradient is non-finite.
void SgdStep(std::span<Parameter> params, OptimizerState& state, double lr);

/// Adam with decoupled weight decay: p -= lr*wd*p, then the bias-corrected
/// moment update.
void AdamStep(std::span<Parameter> params, OptimizerState& state, double lr);

/// Dispatches on state.config().kind.
void OptimizerStep(std::span<Parameter> params, OptimizerState& state, double lr);

/// base_lr * (1 + cos(pi * epoch / total)) / 2
double CosineLr(int epoch, int total, double base_lr);

}  // namespace starlk::nn

#endif  // STARLK_NN_OPTIM_HPP_
