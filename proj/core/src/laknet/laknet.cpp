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

#include "starlk/laknet/laknet.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "starlk/kv.hpp"
#include "starlk/rng.hpp"

namespace starlk::laknet {

using nn::Mode;
using nn::Tensor;

// ---------------------------------------------------------------------------
// Config

LaKNetConfig LaKNetConfig::Full(int num_classes) {
  LaKNetConfig c;
  c.num_classes = num_classes;
  return c;
}

LaKNetConfig LaKNetConfig::Toy(int num_classes) {
  LaKNetConfig c;
  c.stage_depths = {1, 1, 2, 1};
  c.stage_channels = {16, 32, 64, 128};
  c.large_kernels = {7, 7, 5, 3};
  c.stem_channels = 16;
  c.num_classes = num_classes;
  c.input_side = 32;
  return c;
}

void LaKNetConfig::Validate() const {
  auto need4 = [](const std::vector<int>& v, const char* name) {
    if (v.size() != 4) {
      throw std::invalid_argument(std::string(name) + " must list 4 stages, got " +
                                  std::to_string(v.size()));
    }
  };
  need4(stage_depths, "stage_depths");
  need4(stage_channels, "stage_channels");
  need4(large_kernels, "large_kernels");
  for (int i = 0; i < 4; ++i) {
    if (stage_depths[i] < 0) throw std::invalid_argument("stage_depths must be >= 0");
    if (stage_channels[i] < 1) throw std::invalid_argument("stage_channels must be >= 1");
    if (large_kernels[i] < 1 || large_kernels[i] % 2 == 0) {
      throw std::invalid_argument("large_kernels must be odd and positive, got " +
                                  std::to_string(large_kernels[i]));
    }
  }
  if (small_kernel < 1 || small_kernel % 2 == 0) throw std::invalid_argument("small_kernel must be odd");
  if (dilations.empty()) throw std::invalid_argument("dilations must not be empty");
  for (int d : dilations) {
    if (d < 1) throw std::invalid_argument("dilations must be >= 1");
  }
  if (stem_channels < 1) throw std::invalid_argument("stem_channels must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (in_channels < 1) throw std::invalid_argument("in_channels must be >= 1");
  if (input_side < 32 || input_side % 32 != 0) {
    throw std::invalid_argument("input_side must be a positive multiple of 32, got " +
                                std::to_string(input_side));
  }
}

std::string LaKNetConfig::ToText() const {
  std::string s;
  s += "stage_depths = " + kv::JoinInts(stage_depths) + "\n";
  s += "stage_channels = " + kv::JoinInts(stage_channels) + "\n";
  s += "large_kernels = " + kv::JoinInts(large_kernels) + "\n";
  s += "small_kernel = " + std::to_string(small_kernel) + "\n";
  s += "dilations = " + kv::JoinInts(dilations) + "\n";
  s += "stem_channels = " + std::to_string(stem_channels) + "\n";
  s += "num_classes = " + std::to_string(num_classes) + "\n";
  s += "input_side = " + std::to_string(input_side) + "\n";
  s += "in_channels = " + std::to_string(in_channels) + "\n";
  return s;
}

LaKNetConfig LaKNetConfig::FromText(const std::string& text) {
  LaKNetConfig c;
  for (const auto& e : kv::Parse(text)) {
    if (!e.section.empty() && e.section != "model") {
      throw std::invalid_argument("line " + std::to_string(e.line) + ": unexpected section [" + e.section + "]");
    }
    if (e.key == "stage_depths") c.stage_depths = kv::ToIntList(e);
    else if (e.key == "stage_channels") c.stage_channels = kv::ToIntList(e);
    else if (e.key == "large_kernels") c.large_kernels = kv::ToIntList(e);
    else if (e.key == "small_kernel") c.small_kernel = kv::ToInt(e);
    else if (e.key == "dilations") c.dilations = kv::ToIntList(e);
    else if (e.key == "stem_channels") c.stem_channels = kv::ToInt(e);
    else if (e.key == "num_classes") c.num_classes = kv::ToInt(e);
    else if (e.key == "input_side") c.input_side = kv::ToInt(e);
    else if (e.key == "in_channels") c.in_channels = kv::ToInt(e);
    else throw std::invalid_argument("line " + std::to_string(e.line) + ": unknown model key '" + e.key + "'");
  }
  c.Validate();
  return c;
}

LaKNetConfig LaKNetConfig::Load(const std::filesystem::path& path) {
  try {
    return FromText(kv::ReadFile(path.string()));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void LaKNetConfig::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << ToText();
}

// ---------------------------------------------------------------------------
// Layers

namespace {

nn::Conv2dOptions Opts(int stride, int dilation, int groups) {
  nn::Conv2dOptions o;
  o.stride = stride;
  o.dilation = dilation;
  o.groups = groups;
  return o;
}

Tensor Depthwise(const Tensor& x, const Tensor& w, int stride, int dilation) {
  return nn::Conv2d(x, w, Opts(stride, dilation, static_cast<int>(x.dim(1))));
}

void RequireChannels(const char* where, const Tensor& x, std::int64_t channels) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw std::invalid_argument(std::string(where) + ": expected [B," + std::to_string(channels) +
                                ",H,W] input, got " + nn::ShapeString(x.shape()));
  }
}

}  // namespace

Tensor ConvBnForward(const Tensor& x, ConvBn& layer, Mode mode) {
  return nn::BatchNorm2d(nn::Conv2d(x, layer.weight, layer.options), layer.scale, layer.shift,
                         layer.stats, mode);
}

Tensor StemForward(const Tensor& x, StemParams& params, Mode mode) {
  if (x.rank() != 4) throw std::invalid_argument("stem: expected [B,C,H,W], got " + nn::ShapeString(x.shape()));
  if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0) {
    throw std::invalid_argument("stem: spatial size " + std::to_string(x.dim(2)) + "x" +
                                std::to_string(x.dim(3)) + " is not divisible by 4");
  }
  Tensor y = nn::Relu(ConvBnForward(x, params.conv3x3, mode));
  y = nn::Relu(ConvBnForward(y, params.conv1x1, mode));
  return nn::Relu(ConvBnForward(y, params.dw3x3, mode));
}

Tensor EmbeddingForward(const Tensor& x, EmbeddingParams& params, Mode mode) {
  RequireChannels("embedding", x, params.proj.weight.dim(1));
  return nn::Relu(ConvBnForward(nn::Relu(x), params.proj, mode));
}

Tensor LaKBlockConvBranch(const Tensor& z, const LaKBlockParams& params) {
  RequireChannels("lakblock", z, params.lak_weight.dim(0));
  Tensor k = Depthwise(z, params.lak_weight, 1, 1);
  Tensor sak;
  for (std::size_t i = 0; i < params.sak_weights.size(); ++i) {
    Tensor branch = Depthwise(z, params.sak_weights[i], 1, params.sak_dilations[i]);
    sak = sak.defined() ? nn::Add(sak, branch) : branch;
  }
  return sak.defined() ? nn::Add(k, sak) : k;
}

Tensor LaKBlockGate(const Tensor& z, const LaKBlockParams& params) {
  RequireChannels("lakblock gate", z, params.gate_weight.dim(1));
  return nn::Relu(nn::Conv2d(z, params.gate_weight, Opts(1, 1, 1), params.gate_bias));
}

Tensor LaKBlockForward(const Tensor& z, LaKBlockParams& params, Mode mode) {
  Tensor merged = nn::Mul(LaKBlockConvBranch(z, params), LaKBlockGate(z, params));
  return nn::Add(z, nn::BatchNorm2d(merged, params.norm_scale, params.norm_shift, params.norm_stats, mode));
}

Tensor NeckForward(const Tensor& x, NeckParams& params, Mode mode) {
  RequireChannels("neck", x, params.dw_weight.dim(0));
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw std::invalid_argument("neck: spatial size " + std::to_string(x.dim(2)) + "x" +
                                std::to_string(x.dim(3)) + " must be even");
  }
  return ConvBnForward(Depthwise(x, params.dw_weight, 2, 1), params.pw, mode);
}

// ---------------------------------------------------------------------------
// Model

namespace {

// Fan-in scaled normal, resampled outside two standard deviations.
Tensor TruncNormal(const nn::Shape& shape, double stddev, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(nn::NumElements(shape)));
  for (double& x : v) {
    double z;
    do {
      z = rng.Normal();
    } while (std::abs(z) > 2.0);
    x = z * stddev;
  }
  nn::RoundToPrecision(v);
  return Tensor::FromData(shape, std::move(v), true);
}

Tensor ConvWeight(std::int64_t out, std::int64_t in_per_group, std::int64_t k, Rng& rng) {
  const double fan_in = static_cast<double>(in_per_group * k * k);
  return TruncNormal({out, in_per_group, k, k}, std::sqrt(2.0 / fan_in), rng);
}

ConvBn MakeConvBn(std::int64_t in, std::int64_t out, int k, int stride, int groups, Rng& rng) {
  ConvBn layer;
  layer.weight = ConvWeight(out, in / groups, k, rng);
  layer.options = Opts(stride, 1, groups);
  layer.scale = Tensor::Full({out}, 1.0, true);
  layer.shift = Tensor::Zeros({out}, true);
  layer.stats = nn::BatchNormStats::ForChannels(out);
  return layer;
}

}  // namespace

Model::Model(LaKNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.Validate();
  Rng rng(seed);
  const int S = config_.stem_channels;
  stem_.conv3x3 = MakeConvBn(config_.in_channels, S, 3, 2, 1, rng);
  stem_.conv1x1 = MakeConvBn(S, S, 1, 1, 1, rng);
  stem_.dw3x3 = MakeConvBn(S, S, 3, 2, S, rng);

  std::int64_t in = S;
  for (int i = 0; i < 4; ++i) {
    const std::int64_t C = config_.stage_channels[i];
    StageParams stage;
    stage.embedding.proj = MakeConvBn(in, C, 1, 1, 1, rng);
    for (int b = 0; b < config_.stage_depths[i]; ++b) {
      LaKBlockParams blk;
      blk.lak_weight = ConvWeight(C, 1, config_.large_kernels[i], rng);
      blk.sak_weights.push_back(ConvWeight(C, 1, config_.small_kernel, rng));
      blk.sak_dilations.push_back(1);
      for (int d : config_.dilations) {
        blk.sak_weights.push_back(ConvWeight(C, 1, 3, rng));
        blk.sak_dilations.push_back(d);
      }
      blk.gate_weight = ConvWeight(C, C, 1, rng);
      blk.gate_bias = Tensor::Zeros({C}, true);
      blk.norm_scale = Tensor::Full({C}, 1.0, true);
      blk.norm_shift = Tensor::Zeros({C}, true);
      blk.norm_stats = nn::BatchNormStats::ForChannels(C);
      stage.blocks.push_back(std::move(blk));
    }
    stages_.push_back(std::move(stage));
    if (i < 3) {
      const std::int64_t next = config_.stage_channels[i + 1];
      NeckParams neck;
      neck.dw_weight = ConvWeight(C, 1, 3, rng);
      neck.pw = MakeConvBn(C, next, 1, 1, 1, rng);
      necks_.push_back(std::move(neck));
      in = next;
    }
  }
  head_weight_ = TruncNormal({config_.num_classes, config_.stage_channels[3]}, 0.02, rng);
  head_bias_ = Tensor::Zeros({config_.num_classes}, true);
  Register();
}

void Model::Register() {
  auto param = [this](std::string name, const Tensor& t, bool exempt) {
    parameters_.push_back({std::move(name), t, exempt});
  };
  auto conv_bn = [&](const std::string& prefix, const ConvBn& l) {
    param(prefix + ".weight", l.weight, false);
    param(prefix + ".bn.scale", l.scale, true);
    param(prefix + ".bn.shift", l.shift, true);
    buffers_.emplace_back(prefix + ".bn.running_mean", l.stats.running_mean);
    buffers_.emplace_back(prefix + ".bn.running_var", l.stats.running_var);
  };
  conv_bn("stem.conv3x3", stem_.conv3x3);
  conv_bn("stem.conv1x1", stem_.conv1x1);
  conv_bn("stem.dw3x3", stem_.dw3x3);
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string s = "stages." + std::to_string(i);
    conv_bn(s + ".embedding.proj", stages_[i].embedding.proj);
    for (std::size_t b = 0; b < stages_[i].blocks.size(); ++b) {
      const auto& blk = stages_[i].blocks[b];
      const std::string p = s + ".blocks." + std::to_string(b);
      param(p + ".lak.weight", blk.lak_weight, false);
      for (std::size_t k = 0; k < blk.sak_weights.size(); ++k) {
        param(p + ".sak" + std::to_string(k) + ".weight", blk.sak_weights[k], false);
      }
      param(p + ".gate.weight", blk.gate_weight, false);
      param(p + ".gate.bias", blk.gate_bias, true);
      param(p + ".bn.scale", blk.norm_scale, true);
      param(p + ".bn.shift", blk.norm_shift, true);
      buffers_.emplace_back(p + ".bn.running_mean", blk.norm_stats.running_mean);
      buffers_.emplace_back(p + ".bn.running_var", blk.norm_stats.running_var);
    }
    if (i < necks_.size()) {
      const std::string n = "necks." + std::to_string(i);
      param(n + ".dw.weight", necks_[i].dw_weight, false);
      conv_bn(n + ".pw", necks_[i].pw);
    }
  }
  param("head.weight", head_weight_, false);
  param("head.bias", head_bias_, true);

  std::set<std::string> names;
  for (const auto& p : parameters_) {
    if (!names.insert(p.name).second) throw std::logic_error("duplicate parameter name " + p.name);
  }
  for (const auto& [name, t] : buffers_) {
    if (!names.insert(name).second) throw std::logic_error("duplicate buffer name " + name);
  }
}

std::int64_t Model::ParameterCount() const {
  std::int64_t n = 0;
  for (const auto& p : parameters_) n += p.tensor.numel();
  return n;
}

void Model::ZeroGrad() {
  for (auto& p : parameters_) p.tensor.ZeroGrad();
}

ForwardResult Model::Run(const Tensor& x, const ForwardOptions& options) {
  const std::int64_t side = config_.input_side;
  if (x.rank() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != side || x.dim(3) != side) {
    throw std::invalid_argument("model expects input [B," + std::to_string(config_.in_channels) + "," +
                                std::to_string(side) + "," + std::to_string(side) + "], got " +
                                nn::ShapeString(x.shape()));
  }
  ForwardResult result;
  Tensor h = StemForward(x, stem_, mode_);
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    h = EmbeddingForward(h, stages_[i].embedding, mode_);
    for (auto& blk : stages_[i].blocks) h = LaKBlockForward(h, blk, mode_);
    if (options.stage_hook) h = options.stage_hook(static_cast<int>(i), h);
    result.stage_outputs.push_back(h);
    if (i < necks_.size()) h = NeckForward(h, necks_[i], mode_);
  }
  result.features = nn::GlobalAvgPool(h);
  result.logits = nn::Linear(result.features, head_weight_, head_bias_);
  return result;
}

nn::Checkpoint Model::ToCheckpoint(std::uint64_t seed) const {
  nn::Checkpoint ck;
  ck.seed = seed;
  auto add = [&ck](const std::string& name, const Tensor& t) {
    nn::CheckpointEntry e;
    e.name = name;
    e.shape = t.shape();
    e.values.reserve(static_cast<std::size_t>(t.numel()));
    for (double v : t.data()) e.values.push_back(static_cast<float>(v));
    ck.entries.push_back(std::move(e));
  };
  for (const auto& p : parameters_) add(p.name, p.tensor);
  for (const auto& [name, t] : buffers_) add(name, t);
  return ck;
}

void Model::LoadCheckpoint(const nn::Checkpoint& checkpoint) {
  auto load = [&checkpoint](const std::string& name, Tensor t) {
    const auto* e = checkpoint.Find(name);
    if (!e) throw std::runtime_error("checkpoint is missing entry '" + name + "'");
    if (e->shape != t.shape()) {
      throw std::runtime_error("checkpoint entry '" + name + "' has shape " + nn::ShapeString(e->shape) +
                               ", model expects " + nn::ShapeString(t.shape()));
    }
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = e->values[i];
  };
  std::size_t expected = parameters_.size() + buffers_.size();
  for (auto& p : parameters_) load(p.name, p.tensor);
  for (auto& [name, t] : buffers_) load(name, t);
  if (checkpoint.entries.size() != expected) {
    for (const auto& e : checkpoint.entries) {
      bool known = false;
      for (const auto& p : parameters_) known = known || p.name == e.name;
      for (const auto& b : buffers_) known = known || b.first == e.name;
      if (!known) throw std::runtime_error("checkpoint has unexpected entry '" + e.name + "'");
    }
  }
}

Model BuildLaKNet(const LaKNetConfig& config, std::uint64_t seed) {
  config.Validate();
  return Model(config, seed);
}

}  // namespace starlk::laknet
