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

#ifndef STARLK_LAKNET_LAKNET_HPP_
#define STARLK_LAKNET_LAKNET_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "starlk/nn/checkpoint.hpp"
#include "starlk/nn/ops.hpp"
#include "starlk/nn/optim.hpp"

namespace starlk::laknet {

struct LaKNetConfig {
  std::vector<int> stage_depths{2, 2, 18, 2};
  std::vector<int> stage_channels{128, 256, 512, 1024};
  std::vector<int> large_kernels{31, 29, 27, 13};
  int small_kernel = 5;
  std::vector<int> dilations{2, 4};
  int stem_channels = 64;
  int num_classes = 600;
  int input_side = 224;
  int in_channels = 1;

  /// Four stages at widths 128..1024 with 31/29/27/13 large kernels, 224 input.
  static LaKNetConfig Full(int num_classes);
  /// Desk-scale variant: depths {1,1,2,1}, widths {16,32,64,128}, kernels
  /// {7,7,5,3}, stem 16, input 32.
  static LaKNetConfig Toy(int num_classes);

  void Validate() const;

  /// `key = value` lines; lists are comma separated.
  std::string ToText() const;
  static LaKNetConfig FromText(const std::string& text);
  static LaKNetConfig Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

  bool operator==(const LaKNetConfig&) const = default;
};

/// Bias-free convolution followed by batch norm.
struct ConvBn {
  nn::Tensor weight;
  nn::Conv2dOptions options;
  nn::Tensor scale;
  nn::Tensor shift;
  nn::BatchNormStats stats;
};

struct StemParams {
  ConvBn conv3x3;  // stride 2, in -> stem
  ConvBn conv1x1;  // stem -> stem
  ConvBn dw3x3;    // depthwise, stride 2
};

struct EmbeddingParams {
  ConvBn proj;  // 1x1, stage input width -> stage width
};

struct LaKBlockParams {
  nn::Tensor lak_weight;                   // [C,1,K,K]
  std::vector<nn::Tensor> sak_weights;     // [C,1,5,5], [C,1,3,3], [C,1,3,3]
  std::vector<int> sak_dilations;          // 1, 2, 4
  nn::Tensor gate_weight;                  // [C,C,1,1]
  nn::Tensor gate_bias;                    // [C]
  nn::Tensor norm_scale;
  nn::Tensor norm_shift;
  nn::BatchNormStats norm_stats;
};

struct NeckParams {
  nn::Tensor dw_weight;  // [C,1,3,3], stride 2
  ConvBn pw;             // 1x1, C -> C'
};

struct StageParams {
  EmbeddingParams embedding;
  std::vector<LaKBlockParams> blocks;
};

nn::Tensor ConvBnForward(const nn::Tensor& x, ConvBn& layer, nn::Mode mode);

/// conv3x3/s2 -> BN -> ReLU -> conv1x1 -> BN -> ReLU -> DW conv3x3/s2 -> BN -> ReLU.
nn::Tensor StemForward(const nn::Tensor& x, StemParams& params, nn::Mode mode);

/// ReLU -> conv1x1 -> BN -> ReLU.
nn::Tensor EmbeddingForward(const nn::Tensor& x, EmbeddingParams& params, nn::Mode mode);

/// Kernel mixing: DW KxK(Z) + DW 5x5(Z) + DW 3x3 d2(Z) + DW 3x3 d4(Z).
nn::Tensor LaKBlockConvBranch(const nn::Tensor& z, const LaKBlockParams& params);
/// Gating: ReLU(conv1x1(Z) + b).
nn::Tensor LaKBlockGate(const nn::Tensor& z, const LaKBlockParams& params);
/// Z + BN(conv_branch(Z) * gate(Z)).
nn::Tensor LaKBlockForward(const nn::Tensor& z, LaKBlockParams& params, nn::Mode mode);

/// DW conv3x3/s2 -> conv1x1 -> BN.
nn::Tensor NeckForward(const nn::Tensor& x, NeckParams& params, nn::Mode mode);

struct ForwardOptions {
  /// Called with each stage's output (stage index 0..3); its return value
  /// replaces the output downstream.
  std::function<nn::Tensor(int stage, const nn::Tensor& output)> stage_hook;
};

struct ForwardResult {
  nn::Tensor logits;                     // [B,num_classes]
  nn::Tensor features;                   // [B,C4], pooled, pre-FC
  std::vector<nn::Tensor> stage_outputs;  // after hooks
};

class Model {
 public:
  Model(LaKNetConfig config, std::uint64_t seed);

  const LaKNetConfig& config() const { return config_; }
  nn::Mode mode() const { return mode_; }
  void SetMode(nn::Mode mode) { mode_ = mode; }

  /// Registry in construction order; handles alias the layer tensors.
  std::vector<nn::Parameter>& parameters() { return parameters_; }
  const std::vector<nn::Parameter>& parameters() const { return parameters_; }
  /// BN running statistics.
  const std::vector<std::pair<std::string, nn::Tensor>>& buffers() const { return buffers_; }
  std::int64_t ParameterCount() const;
  void ZeroGrad();

  ForwardResult Run(const nn::Tensor& x, const ForwardOptions& options = {});
  nn::Tensor Forward(const nn::Tensor& x) { return Run(x).logits; }

  StemParams& stem() { return stem_; }
  std::vector<StageParams>& stages() { return stages_; }
  std::vector<NeckParams>& necks() { return necks_; }
  nn::Tensor& head_weight() { return head_weight_; }
  nn::Tensor& head_bias() { return head_bias_; }

  nn::Checkpoint ToCheckpoint(std::uint64_t seed) const;
  /// Copies every parameter and buffer from `checkpoint`; a missing name or a
  /// shape mismatch throws naming the entry.
  void LoadCheckpoint(const nn::Checkpoint& checkpoint);

 private:
  void Register();

  LaKNetConfig config_;
  nn::Mode mode_ = nn::Mode::kTrain;
  StemParams stem_;
  std::vector<StageParams> stages_;
  std::vector<NeckParams> necks_;
  nn::Tensor head_weight_;
  nn::Tensor head_bias_;
  std::vector<nn::Parameter> parameters_;
  std::vector<std::pair<std::string, nn::Tensor>> buffers_;
};

/// Validates the config and builds a freshly initialized model.
Model BuildLaKNet(const LaKNetConfig& config, std::uint64_t seed);

}  // namespace starlk::laknet

#endif  // STARLK_LAKNET_LAKNET_HPP_
