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

// Finite-difference cases covering every engine op plus the LaKBlock. All
// tensors fit in 2x4x9x9.

#ifndef STARLK_TESTS_SUPPORT_GRAD_SUITE_HPP_
#define STARLK_TESTS_SUPPORT_GRAD_SUITE_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "starlk/laknet/laknet.hpp"
#include "support/gradcheck.hpp"

namespace starlk::testing {

struct GradCase {
  std::string name;
  std::function<GradCheckResult(Rng&)> run;
};

namespace detail {

inline GradCase ConvCase(std::string name, nn::Shape in, nn::Shape w, nn::Conv2dOptions opt, bool bias) {
  return {std::move(name), [=](Rng& rng) {
            std::vector<nn::Tensor> inputs{RandomTensor(in, rng), RandomTensor(w, rng, 0.5)};
            if (bias) inputs.push_back(RandomTensor({w[0]}, rng));
            return GradCheck(
                [opt, bias](const std::vector<nn::Tensor>& t) {
                  return nn::Conv2d(t[0], t[1], opt, bias ? t[2] : nn::Tensor{});
                },
                inputs, rng);
          }};
}

inline std::vector<double> SoftLabels(std::int64_t rows, std::int64_t cols, Rng& rng) {
  std::vector<double> y(static_cast<std::size_t>(rows * cols));
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) s += (y[r * cols + c] = rng.Uniform(0.05, 1.0));
    for (std::int64_t c = 0; c < cols; ++c) y[r * cols + c] /= s;
  }
  return y;
}

// Input order: z, lak, sak5, sak3 d2, sak3 d4, gate weight, gate bias, BN
// scale, BN shift.
inline laknet::LaKBlockParams BlockFrom(const std::vector<nn::Tensor>& t, std::int64_t channels) {
  laknet::LaKBlockParams p;
  p.lak_weight = t[1];
  p.sak_weights = {t[2], t[3], t[4]};
  p.sak_dilations = {1, 2, 4};
  p.gate_weight = t[5];
  p.gate_bias = t[6];
  p.norm_scale = t[7];
  p.norm_shift = t[8];
  p.norm_stats = nn::BatchNormStats::ForChannels(channels);
  return p;
}

/// Draws block inputs whose gate pre-activations all sit at least `margin`
/// from the ReLU kink, so a perturbation of size h cannot cross it and the
/// difference quotient stays a valid oracle.
inline std::vector<nn::Tensor> DrawBlockInputs(Rng& rng, std::int64_t channels, int kernel, double margin) {
  constexpr std::int64_t kBatch = 2, kSide = 9;
  for (;;) {
    std::vector<nn::Tensor> t{
        RandomTensor({kBatch, channels, kSide, kSide}, rng),
        RandomTensor({channels, 1, kernel, kernel}, rng, 0.3),
        RandomTensor({channels, 1, 5, 5}, rng, 0.3),
        RandomTensor({channels, 1, 3, 3}, rng, 0.3),
        RandomTensor({channels, 1, 3, 3}, rng, 0.3),
        RandomTensor({channels, channels, 1, 1}, rng, 0.5),
        RandomTensor({channels}, rng, 0.5),
        RandomTensor({channels}, rng, 0.5),
        RandomTensor({channels}, rng, 0.5),
    };
    for (double& s : t[7].mutable_data()) s += 1.0;
    double closest = std::numeric_limits<double>::infinity();
    {
      nn::NoGradGuard no_grad;
      const auto p = BlockFrom(t, channels);
      nn::Conv2dOptions o;
      const nn::Tensor pre = nn::Conv2d(t[0], p.gate_weight, o, p.gate_bias);
      for (double v : pre.data()) closest = std::min(closest, std::abs(v));
    }
    if (closest > margin) return t;
  }
}

}  // namespace detail

inline std::vector<GradCase> GradSuite() {
  using nn::Conv2dOptions;
  std::vector<GradCase> cases;
  cases.push_back(detail::ConvCase("conv2d_3x3_same_bias", {2, 3, 7, 7}, {4, 3, 3, 3}, {}, true));
  Conv2dOptions s2;
  s2.stride = 2;
  cases.push_back(detail::ConvCase("conv2d_3x3_stride2", {2, 4, 9, 9}, {3, 4, 3, 3}, s2, false));
  Conv2dOptions d2;
  d2.dilation = 2;
  cases.push_back(detail::ConvCase("conv2d_3x3_dilation2", {2, 2, 9, 9}, {2, 2, 3, 3}, d2, false));
  Conv2dOptions dw;
  dw.groups = 4;
  cases.push_back(detail::ConvCase("conv2d_depthwise_7x7", {2, 4, 9, 9}, {4, 1, 7, 7}, dw, true));
  Conv2dOptions dw4 = dw;
  dw4.dilation = 4;
  cases.push_back(detail::ConvCase("conv2d_depthwise_dilation4", {2, 4, 9, 9}, {4, 1, 3, 3}, dw4, false));
  cases.push_back(detail::ConvCase("conv2d_pointwise", {2, 4, 9, 9}, {3, 4, 1, 1}, {}, true));
  cases.push_back(detail::ConvCase("conv2d_even_kernel_same", {2, 2, 6, 6}, {2, 2, 2, 2}, {}, false));
  Conv2dOptions explicit_pad;
  explicit_pad.same_padding = false;
  explicit_pad.pad_top = 2;
  explicit_pad.pad_left = 1;
  explicit_pad.stride = 2;
  cases.push_back(detail::ConvCase("conv2d_explicit_padding", {1, 2, 8, 7}, {3, 2, 3, 3}, explicit_pad, true));

  for (const nn::Mode mode : {nn::Mode::kTrain, nn::Mode::kEval}) {
    const bool train = mode == nn::Mode::kTrain;
    cases.push_back({train ? "batchnorm2d_train" : "batchnorm2d_eval", [mode](Rng& rng) {
                       auto stats = nn::BatchNormStats::ForChannels(3);
                       for (double& m : stats.running_mean.mutable_data()) m = rng.Normal();
                       for (double& v : stats.running_var.mutable_data()) v = rng.Uniform(0.5, 2.0);
                       return GradCheck(
                           [&stats, mode](const std::vector<nn::Tensor>& t) {
                             return nn::BatchNorm2d(t[0], t[1], t[2], stats, mode);
                           },
                           {RandomTensor({2, 3, 5, 4}, rng, 2.0), RandomTensor({3}, rng), RandomTensor({3}, rng)},
                           rng);
                     }});
  }

  cases.push_back({"relu", [](Rng& rng) {
                     nn::Tensor x = RandomTensor({2, 4, 9, 9}, rng);
                     AwayFromZero(x, 1e-3);
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Relu(t[0]); }, {x}, rng);
                   }});
  cases.push_back({"silu", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Silu(t[0]); },
                                      {RandomTensor({2, 4, 9, 9}, rng, 3.0)}, rng);
                   }});
  cases.push_back({"sigmoid", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Sigmoid(t[0]); },
                                      {RandomTensor({2, 4, 9, 9}, rng, 3.0)}, rng);
                   }});
  cases.push_back({"add", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Add(t[0], t[1]); },
                                      {RandomTensor({2, 4, 3, 3}, rng), RandomTensor({2, 4, 3, 3}, rng)}, rng);
                   }});
  cases.push_back({"add_same_operand", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Add(t[0], t[0]); },
                                      {RandomTensor({2, 4, 3, 3}, rng)}, rng);
                   }});
  cases.push_back({"mul", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Mul(t[0], t[1]); },
                                      {RandomTensor({2, 4, 3, 3}, rng), RandomTensor({2, 4, 3, 3}, rng)}, rng);
                   }});
  cases.push_back({"mul_square", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Mul(t[0], t[0]); },
                                      {RandomTensor({2, 4, 3, 3}, rng)}, rng);
                   }});
  cases.push_back({"scale", [](Rng& rng) {
                     const double factor = rng.Uniform(-2.0, 2.0);
                     return GradCheck([factor](const std::vector<nn::Tensor>& t) { return nn::Scale(t[0], factor); },
                                      {RandomTensor({2, 4, 3, 3}, rng)}, rng);
                   }});
  cases.push_back({"sum", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Sum(t[0]); },
                                      {RandomTensor({2, 4, 9, 9}, rng)}, rng);
                   }});
  cases.push_back({"pick", [](Rng& rng) {
                     const auto index = rng.UniformInt(2 * 4 * 3 * 3);
                     return GradCheck([index](const std::vector<nn::Tensor>& t) { return nn::Pick(t[0], index); },
                                      {RandomTensor({2, 4, 3, 3}, rng)}, rng);
                   }});
  cases.push_back({"linear_bias", [](Rng& rng) {
                     return GradCheck(
                         [](const std::vector<nn::Tensor>& t) { return nn::Linear(t[0], t[1], t[2]); },
                         {RandomTensor({2, 9}, rng), RandomTensor({4, 9}, rng), RandomTensor({4}, rng)}, rng);
                   }});
  cases.push_back({"linear_no_bias", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::Linear(t[0], t[1]); },
                                      {RandomTensor({2, 9}, rng), RandomTensor({4, 9}, rng)}, rng);
                   }});
  cases.push_back({"global_avg_pool", [](Rng& rng) {
                     return GradCheck([](const std::vector<nn::Tensor>& t) { return nn::GlobalAvgPool(t[0]); },
                                      {RandomTensor({2, 4, 9, 9}, rng)}, rng);
                   }});
  cases.push_back({"soft_cross_entropy", [](Rng& rng) {
                     const nn::Tensor y = nn::Tensor::FromData({2, 5}, detail::SoftLabels(2, 5, rng));
                     return GradCheck(
                         [y](const std::vector<nn::Tensor>& t) { return nn::SoftCrossEntropy(t[0], y); },
                         {RandomTensor({2, 5}, rng, 2.0)}, rng);
                   }});

  for (const nn::Mode mode : {nn::Mode::kTrain, nn::Mode::kEval}) {
    const bool train = mode == nn::Mode::kTrain;
    cases.push_back({train ? "lakblock_train" : "lakblock_eval", [mode](Rng& rng) {
                       constexpr std::int64_t kChannels = 4;
                       auto inputs = detail::DrawBlockInputs(rng, kChannels, 7, 1e-3);
                       auto stats = nn::BatchNormStats::ForChannels(kChannels);
                       for (double& v : stats.running_var.mutable_data()) v = rng.Uniform(0.5, 2.0);
                       return GradCheck(
                           [&stats, mode](const std::vector<nn::Tensor>& t) {
                             auto p = detail::BlockFrom(t, kChannels);
                             p.norm_stats = stats;
                             return laknet::LaKBlockForward(t[0], p, mode);
                           },
                           inputs, rng);
                     }});
  }
  return cases;
}

}  // namespace starlk::testing

#endif  // STARLK_TESTS_SUPPORT_GRAD_SUITE_HPP_
