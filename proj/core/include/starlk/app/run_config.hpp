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

#ifndef STARLK_APP_RUN_CONFIG_HPP_
#define STARLK_APP_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "starlk/data/dataset.hpp"
#include "starlk/data/synthetic.hpp"
#include "starlk/eval/metrics.hpp"
#include "starlk/mix/starmix.hpp"
#include "starlk/nn/optim.hpp"
#include "starlk/nn/tensor.hpp"

namespace starlk::app {

enum class Augmentation { kNone, kMixup, kStarmix };
std::string ToString(Augmentation a);
Augmentation ParseAugmentation(const std::string& text);

enum class Scheduler { kCosine, kConstant };
std::string ToString(Scheduler s);
Scheduler ParseScheduler(const std::string& text);

std::string ToString(nn::Precision p);
nn::Precision ParsePrecision(const std::string& text);

/// Everything one experiment needs. Text form: `[section]` headers followed
/// by `key = value` lines; every key has a default and unknown keys are
/// errors.
struct RunConfig {
  // [data] An empty root selects the generated synthetic set.
  std::string data_root;
  std::uint64_t split_seed = 0;
  data::SyntheticVeinSpec synthetic;

  // [model]
  std::string model_preset = "toy";  // toy | full
  std::string model_file;            // overrides the preset when set
  int num_classes = 0;               // 0: taken from the dataset

  // [optim]
  nn::OptimizerKind optimizer = nn::OptimizerKind::kSgdMomentum;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  Scheduler scheduler = Scheduler::kCosine;

  // [train]
  int epochs = 30;
  int batch_size = 32;
  int eval_batch = 64;
  Augmentation augmentation = Augmentation::kNone;
  std::uint64_t seed = 0;
  nn::Precision precision = nn::Precision::kTest;

  // [mix]
  double mix_alpha = 1.0;
  double threshold_lo = 0.3;
  double threshold_hi = 0.7;

  // [augment]
  data::AugmentPolicy augment;

  // [eval]
  double impostor_ratio = 10.0;
  std::int64_t max_genuine = 200000;
  int num_thresholds = 1000;
  std::vector<double> occlusion_ratios{0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
  int patch_side = 16;
  int cam_stage = -1;  // -1: deepest stage with a 2x2 or larger output

  // [run]
  std::string out_dir = "runs/default";

  void Validate() const;
  /// Mix settings for the configured augmentation; mixup routes every
  /// lambda to the vanilla path.
  mix::MixParams MixParams() const;
  nn::OptimizerConfig OptimizerConfig() const;

  std::string Emit() const;
  static RunConfig Parse(const std::string& text);
  static RunConfig Load(const std::filesystem::path& path);

  bool operator==(const RunConfig& other) const { return Emit() == other.Emit(); }
};

}  // namespace starlk::app

#endif  // STARLK_APP_RUN_CONFIG_HPP_
