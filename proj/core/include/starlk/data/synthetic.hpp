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

#ifndef STARLK_DATA_SYNTHETIC_HPP_
#define STARLK_DATA_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>

#include "starlk/data/dataset.hpp"
#include "starlk/image.hpp"
#include "starlk/rng.hpp"

namespace starlk::data {

/// Procedural stand-in for near-infrared vein captures: each class owns a few
/// smooth dark curves on a bright background; each image of the class redraws
/// them with a small shift, a contrast change and sensor noise.
struct SyntheticVeinSpec {
  int num_classes = 10;
  int images_per_class = 50;
  int side = 32;
  int min_veins = 3;
  int max_veins = 5;
  double min_thickness = 1.0;  // Gaussian profile width in pixels
  double max_thickness = 2.2;
  double contrast = 0.55;      // vein depth below the background
  double contrast_jitter = 0.1;
  double noise = 0.04;         // per-pixel Gaussian noise stddev
  double max_shift = 2.0;      // per-image translation bound in pixels
  std::uint64_t seed = 7;

  void Validate() const;
};

/// One rendered image of `class_index`, sample `image_index`; values in [0,1].
Plane RenderSyntheticVein(const SyntheticVeinSpec& spec, int class_index, int image_index);

/// Writes out_root/class_XXX/session_{1,2}/img_YYY.pgm (images alternate
/// between the two sessions) plus out_root/manifest.txt, and returns the
/// manifest.
DatasetManifest GenerateSynthetic(const SyntheticVeinSpec& spec, const std::filesystem::path& out_root);

}  // namespace starlk::data

#endif  // STARLK_DATA_SYNTHETIC_HPP_
