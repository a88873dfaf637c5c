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

#ifndef STARLK_APP_COMMANDS_HPP_
#define STARLK_APP_COMMANDS_HPP_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "starlk/app/run_config.hpp"
#include "starlk/data/dataset.hpp"
#include "starlk/eval/metrics.hpp"
#include "starlk/laknet/laknet.hpp"

namespace starlk::app {

/// Resolved dataset plus the model config it implies.
struct Workspace {
  data::DatasetManifest manifest;
  laknet::LaKNetConfig model;
};

/// Generates the synthetic set under <out>/dataset when no root is given,
/// otherwise scans the root. Writes <out>/manifest.txt.
Workspace PrepareWorkspace(const RunConfig& config);

struct RunRecord {
  RunConfig config;
  eval::EpochHistory history;
  std::optional<double> final_top1;
  bool final_top1_full_window = false;
  std::optional<double> eer;
  double best_top1 = 0.0;
  std::int64_t star_steps = 0;
  std::int64_t vanilla_steps = 0;
  std::int64_t parameter_count = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path best_checkpoint;
  double wall_seconds = 0.0;

  std::string ToJson() const;
};

struct TrainOptions {
  /// Write history.csv, run.json, config and checkpoints under out_dir.
  bool write_outputs = true;
  /// Compute the EER of the final model on the test split.
  bool final_eer = true;
  std::function<void(const eval::EpochRecord&)> on_epoch;
};

/// The training loop: per batch, augment, optionally mix, forward, soft
/// cross-entropy, backward, optimizer step; per epoch, schedule the learning
/// rate and score the test split.
RunRecord Train(const RunConfig& config, const TrainOptions& options = {});

/// Rebuilds the model of `config` and loads `checkpoint`
/// (default <out>/checkpoint.slkc).
laknet::Model LoadTrainedModel(const RunConfig& config, const Workspace& ws,
                               const std::filesystem::path& checkpoint);

struct EvalMetrics {
  double top1 = 0.0;
  double eer = 0.0;
  std::size_t test_images = 0;
};

/// Writes <out>/eval.json.
EvalMetrics CmdEval(const RunConfig& config, const std::filesystem::path& checkpoint);
/// Writes <out>/roc.csv and <out>/eer.json.
eval::RocCurve CmdRoc(const RunConfig& config, const std::filesystem::path& checkpoint);
/// Writes <out>/occlusion.csv.
eval::OcclusionReport CmdOcclusion(const RunConfig& config, const std::filesystem::path& checkpoint);
/// Writes <out>/cam.pgm for `image` (any supported format).
Plane CmdCam(const RunConfig& config, const std::filesystem::path& checkpoint, const std::filesystem::path& image,
             int class_index);

struct MixPreview {
  double lambda = 0.0;
  double lambda_hat = 0.0;  // of the mask, whichever path is routed
  mix::MixPath path = mix::MixPath::kVanilla;
  std::filesystem::path mask_file;
  std::optional<std::filesystem::path> blend_file;
};

/// Writes <out>/mask_<lambda>.{pgm,txt} and, given two images, the blend
/// that the routed path would produce as <out>/blend_<lambda>.pgm.
MixPreview CmdMixPreview(double lambda, int size, const mix::MixParams& params, const std::filesystem::path& out,
                         const std::optional<std::filesystem::path>& image_a = std::nullopt,
                         const std::optional<std::filesystem::path>& image_b = std::nullopt);

data::DatasetManifest CmdGenSynthetic(const data::SyntheticVeinSpec& spec, const std::filesystem::path& out);

}  // namespace starlk::app

#endif  // STARLK_APP_COMMANDS_HPP_
