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

#include "starlk/nn/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace starlk::nn {

std::string ToString(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind ParseOptimizerKind(const std::string& text) {
  if (text == "sgd" || text == "sgd_momentum") return OptimizerKind::kSgdMomentum;
  if (text == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer kind '" + text + "' (expected sgd|adam)");
}

OptimizerState::OptimizerState(OptimizerConfig config, std::span<const Parameter> params)
    : config_(config) {
  if (!(config_.base_lr > 0.0)) throw std::invalid_argument("optimizer base_lr must be > 0");
  if (config_.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  for (const auto& p : params) {
    first_.emplace_back(p.tensor.numel(), 0.0);
    if (config_.kind == OptimizerKind::kAdam) second_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void OptimizerState::Validate(std::span<const Parameter> params) const {
  if (params.size() != first_.size()) {
    throw std::invalid_argument("optimizer state tracks " + std::to_string(first_.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (static_cast<std::int64_t>(first_[i].size()) != params[i].tensor.numel()) {
      throw std::invalid_argument("optimizer buffer for '" + params[i].name +
                                  "' does not match parameter shape " +
                                  ShapeString(params[i].tensor.shape()));
    }
  }
}

namespace {

void CheckFinite(std::span<const Parameter> params) {
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("non-finite gradient in parameter '" + p.name +
                                 "'; optimizer step rejected");
      }
    }
  }
}

void CheckLr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("learning rate must be a positive finite value");
  }
}

}  // namespace

void SgdStep(std::span<Parameter> params, OptimizerState& state, double lr) {
  CheckLr(lr);
  state.Validate(params);
  CheckFinite(params);
  const auto& cfg = state.config();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto value = p.tensor.mutable_data();
    auto grad = p.tensor.grad();
    auto& buf = state.first()[i];
    const double wd = p.weight_decay_exempt ? 0.0 : cfg.weight_decay;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = (grad.empty() ? 0.0 : grad[k]) + wd * value[k];
      buf[k] = cfg.momentum * buf[k] + g;
      value[k] -= lr * buf[k];
    }
    RoundToPrecision(value);
  }
  state.Advance();
}

void AdamStep(std::span<Parameter> params, OptimizerState& state, double lr) {
  CheckLr(lr);
  state.Validate(params);
  CheckFinite(params);
  const auto& cfg = state.config();
  if (state.second().size() != params.size()) {
    throw std::invalid_argument("optimizer state was not initialized for adam");
  }
  const double t = static_cast<double>(state.step_count() + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto value = p.tensor.mutable_data();
    auto grad = p.tensor.grad();
    auto& m = state.first()[i];
    auto& v = state.second()[i];
    const double wd = p.weight_decay_exempt ? 0.0 : cfg.weight_decay;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad.empty() ? 0.0 : grad[k];
      value[k] -= lr * wd * value[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
    RoundToPrecision(value);
  }
  state.Advance();
}

void OptimizerStep(std::span<Parameter> params, OptimizerState& state, double lr) {
  if (state.config().kind == OptimizerKind::kAdam) {
    AdamStep(params, state, lr);
  } else {
    SgdStep(params, state, lr);
  }
}

double CosineLr(int epoch, int total, double base_lr) {
  if (total <= 0) throw std::invalid_argument("cosine schedule needs total > 0");
  if (epoch < 0 || epoch > total) {
    throw std::invalid_argument("epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(total) + "]");
  }
  if (epoch == total) return 0.0;
  return base_lr * (1.0 + std::cos(std::numbers::pi * epoch / total)) / 2.0;
}

}  // namespace starlk::nn
