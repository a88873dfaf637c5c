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

#ifndef STARLK_NN_OPS_HPP_
#define STARLK_NN_OPS_HPP_

#include "starlk/nn/tensor.hpp"

namespace starlk::nn {

enum class Mode { kTrain, kEval };

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  int groups = 1;
  // Same padding pads dilation*(K-1) zeros in total, the extra one (for even
  // extents) at the bottom/right. Stride-1 outputs keep the input size.
  bool same_padding = true;
  int pad_top = 0;
  int pad_bottom = 0;
  int pad_left = 0;
  int pad_right = 0;
};

struct ConvGeometry {
  std::int64_t out_height;
  std::int64_t out_width;
  int pad_top;
  int pad_left;
};

/// Output size and resolved padding. Throws on inconsistent shapes.
ConvGeometry ResolveConvGeometry(const Shape& input, const Shape& weight,
                                 const Conv2dOptions& options);

/// input [B,Cin,H,W], weight [Cout,Cin/groups,Kh,Kw], optional bias [Cout].
Tensor Conv2d(const Tensor& input, const Tensor& weight, const Conv2dOptions& options,
              const Tensor& bias = {});

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormStats ForChannels(std::int64_t channels);
};

/// Train mode normalizes with batch statistics (biased variance) and folds
/// them into the running estimates (unbiased variance). Eval mode uses the
/// running estimates and leaves them untouched.
Tensor BatchNorm2d(const Tensor& input, const Tensor& scale, const Tensor& shift,
                   BatchNormStats& stats, Mode mode);

Tensor Relu(const Tensor& input);
Tensor Silu(const Tensor& input);
Tensor Sigmoid(const Tensor& input);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double factor);
Tensor Sum(const Tensor& a);

/// Scalar view of one flat element.
Tensor Pick(const Tensor& a, std::int64_t flat_index);

/// input [B,F], weight [C,F], optional bias [C] -> [B,C].
Tensor Linear(const Tensor& input, const Tensor& weight, const Tensor& bias = {});

/// [B,C,H,W] -> [B,C]
Tensor GlobalAvgPool(const Tensor& input);

/// Mean over the batch of -sum_c y_c log softmax(z)_c. Label rows must sum
/// to one within 1e-6; labels are treated as constants.
Tensor SoftCrossEntropy(const Tensor& logits, const Tensor& soft_labels);

}  // namespace starlk::nn

#endif  // STARLK_NN_OPS_HPP_
