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

#ifndef STARLK_DATA_DATASET_HPP_
#define STARLK_DATA_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "starlk/nn/tensor.hpp"
#include "starlk/rng.hpp"

namespace starlk::data {

enum class Split { kTrain, kTest };
std::string ToString(Split split);

struct ManifestEntry {
  std::string path;  // relative to the manifest root, '/' separated
  int class_index = 0;
  std::string session;
  Split split = Split::kTrain;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
  int image_side = 32;
  int channels = 1;

  std::vector<std::size_t> Indices(Split split) const;
  std::size_t Count(Split split) const { return Indices(split).size(); }
  /// Dense class indices and positive side/channels.
  void ValidateStructure() const;
  /// ValidateStructure plus at least one train and one test entry per class.
  void Validate() const;
};

struct SplitRule {
  /// Seed for the stratified fallback used when a class has a single session.
  std::uint64_t seed = 0;
};

/// Walks root/<class>/<session>/<image>. Classes, sessions and files are
/// visited in lexicographic order. When every class has at least two session
/// directories the first session is train and the rest are test; otherwise
/// each class is split 50/50 by a seeded shuffle (train takes the extra image
/// of an odd count).
DatasetManifest ScanDataset(const std::filesystem::path& root, const SplitRule& rule, int image_side);

/// Text cache: header lines `root`, `side`, `channels`, `classes`, then one
/// `path,class,session,split` line per entry.
void WriteManifest(const DatasetManifest& manifest, const std::filesystem::path& file);
DatasetManifest ReadManifest(const std::filesystem::path& file);

/// Decodes an 8-bit gray or RGB image, collapses it to luminance and resizes
/// it bilinearly to side x side. Returns [1,side,side] in [0,1].
nn::Tensor LoadImage(const std::filesystem::path& path, int side);

/// Every image of one split decoded into memory, in manifest order.
struct ImageSet {
  int side = 0;
  int channels = 1;
  std::vector<std::vector<double>> images;  // channels*side*side each
  std::vector<int> labels;
  std::vector<std::string> paths;

  std::size_t size() const { return images.size(); }
  std::size_t image_size() const { return static_cast<std::size_t>(channels) * side * side; }
  /// [N,C,S,S] stack of the selected images (all when `indices` is empty).
  nn::Tensor Stack(std::span<const std::size_t> indices = {}) const;
};

ImageSet LoadSplit(const DatasetManifest& manifest, Split split);

struct AugmentPolicy {
  bool flip = true;
  double flip_prob = 0.5;
  bool crop = true;
  int pad = 3;

  static AugmentPolicy None() { return {false, 0.5, false, 3}; }
  void Validate() const;
};

/// The random choices behind one augmented image; crop offsets index the
/// zero-padded image and lie in [0, 2*pad].
struct AugmentDecision {
  bool flip = false;
  int crop_y = 0;
  int crop_x = 0;
};

AugmentDecision DrawAugment(const AugmentPolicy& policy, Rng& rng);

/// Applies `decision` to a [C,H,W] image in place.
void ApplyAugment(std::span<double> image, int channels, int height, int width, int pad,
                  const AugmentDecision& decision);

/// Draws a decision and applies it to a [C,H,W] or [1,C,H,W] tensor.
nn::Tensor Augment(const nn::Tensor& image, const AugmentPolicy& policy, Rng& rng);

/// Sample order for one epoch: a permutation seeded by (seed, epoch), cut into
/// consecutive batches. The final partial batch is kept; a lone trailing
/// sample joins the previous batch because batch norm and mixing both need
/// two samples.
std::vector<std::vector<std::size_t>> EpochBatches(std::size_t count, int batch_size,
                                                   std::uint64_t seed, int epoch);

struct Batch {
  nn::Tensor images;  // [B,C,S,S]
  std::vector<int> labels;
};

/// Stacks the selected images, augmenting each with its own draw from `rng`
/// in batch order.
Batch AssembleBatch(const ImageSet& set, std::span<const std::size_t> indices,
                    const AugmentPolicy& policy, Rng& rng);

/// [B,K] one-hot rows.
nn::Tensor OneHot(std::span<const int> labels, int num_classes);

}  // namespace starlk::data

#endif  // STARLK_DATA_DATASET_HPP_
