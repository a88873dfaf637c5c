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

#ifndef STARLK_EVAL_METRICS_HPP_
#define STARLK_EVAL_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "starlk/image.hpp"
#include "starlk/laknet/laknet.hpp"
#include "starlk/nn/tensor.hpp"
#include "starlk/rng.hpp"

namespace starlk::eval {

/// Index of the largest value; ties go to the lowest index.
std::int64_t Argmax(std::span<const double> values);

/// Fraction of rows of [B,K] `logits` whose argmax equals the label.
double Top1(const nn::Tensor& logits, std::span<const int> labels);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double top1 = 0.0;
  double lr = 0.0;
};

struct EpochHistory {
  std::vector<EpochRecord> epochs;

  std::size_t size() const { return epochs.size(); }
  /// `epoch,loss,top1,lr` with fixed 10-digit formatting.
  std::string ToCsv() const;
};

struct FinalTop1 {
  double value = 0.0;
  /// False when fewer than 10 epochs were available and all were used.
  bool full_window = true;
};

/// Median test top-1 over the last 10 epochs (mean of the middle two).
FinalTop1 FinalTop1Of(const EpochHistory& history);
double Median(std::vector<double> values);

/// Model accuracy over a stacked image set, evaluated in eval mode without
/// gradients, `batch` images at a time.
double Accuracy(laknet::Model& model, const nn::Tensor& images, std::span<const int> labels, int batch = 64);

/// Pooled pre-classifier features [B,F], eval mode, no gradients.
nn::Tensor Embed(laknet::Model& model, const nn::Tensor& images, int batch = 64);

double Cosine(std::span<const double> a, std::span<const double> b);

struct PairingPolicy {
  /// Genuine pairs beyond this count are subsampled without replacement.
  std::int64_t max_genuine = 200000;
  /// Impostor pairs drawn per genuine pair.
  double impostor_ratio = 10.0;
  std::uint64_t seed = 0;
};

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::string score_tag = "cosine";
  std::vector<std::string> warnings;
};

/// Cosine scores: all same-class pairs i<j as genuine, and
/// round(impostor_ratio * genuine) cross-class pairs drawn with replacement.
ScoreSet ScorePairs(const nn::Tensor& embeddings, std::span<const int> labels, const PairingPolicy& policy);

struct RocCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> far;
  std::vector<double> frr;
  double eer = 0.0;
  double eer_threshold = 0.0;
};

/// Threshold sweep over [min score, max score]: `num_thresholds` uniform
/// points plus every distinct score when there are at most 10000 of them.
/// FAR(t) = share of impostors >= t, FRR(t) = share of genuines < t. The EER
/// is read where FAR - FRR changes sign, interpolating linearly between the
/// bracketing thresholds.
RocCurve SweepRoc(const ScoreSet& scores, int num_thresholds = 1000);

/// CSV with header threshold,far,frr.
void WriteRocCsv(const RocCurve& curve, const std::filesystem::path& file);
/// Brace-delimited `"key": value` summary of the EER operating point.
std::string EerSummary(const RocCurve& curve, const ScoreSet& scores);

/// Patches needed to cover `ratio` of a side x side image with patch x patch
/// squares, rounded to nearest.
int OcclusionPatchCount(int side, int patch, double ratio);

/// Zeroes `count` patch x patch squares of a [C,S,S] image. Each placement
/// retries up to 10 times to avoid overlap and then accepts an overlap.
void OccludeImage(std::span<double> image, int channels, int side, int patch, int count, Rng& rng);

struct OcclusionOptions {
  std::vector<double> ratios{0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
  int patch_side = 16;
  std::uint64_t seed = 0;
  int batch = 64;
};

struct OcclusionReport {
  std::vector<double> ratios;
  std::vector<double> accuracy;
  std::vector<int> patch_counts;
  int patch_side = 16;
  std::uint64_t seed = 0;

  /// CSV with header ratio,accuracy.
  std::string ToCsv() const;
};

/// Top-1 under random zero patches at each ratio. Image i at ratio index r
/// draws from a generator derived from (seed, r, i).
OcclusionReport OcclusionSweep(laknet::Model& model, const nn::Tensor& images, std::span<const int> labels,
                               const OcclusionOptions& options);

/// Deepest stage whose output is at least 2x2.
int DefaultCamStage(const laknet::LaKNetConfig& config);

/// Gradient-weighted activation map for one [1,C,S,S] image: channel weights
/// are the spatial mean of d logit / d activation, the map is
/// ReLU(sum_c w_c A_c), upsampled bilinearly to S x S and min-max normalized.
Plane ActivationMap(laknet::Model& model, const nn::Tensor& image, int class_index,
                    std::optional<int> stage = std::nullopt);

/// Rescales to [0,1]: (v - min) / (max - min). A constant map becomes all
/// ones when positive and all zeros otherwise.
void NormalizeMinMax(Plane& map);

}  // namespace starlk::eval

#endif  // STARLK_EVAL_METRICS_HPP_
