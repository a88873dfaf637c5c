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

#ifndef STARLK_IMAGE_HPP_
#define STARLK_IMAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace starlk {

/// Row-major 2-D grid of reals: masks, fields, heatmaps, grayscale images.
struct Plane {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r * c), fill) {}

  double& at(std::int64_t r, std::int64_t c) { return values[r * cols + c]; }
  double at(std::int64_t r, std::int64_t c) const { return values[r * cols + c]; }
  bool empty() const { return values.empty(); }
};

/// 8-bit interleaved image as decoded from disk.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;
};

/// Decodes PGM/PPM (binary or ASCII), and PNG/JPEG when built with libpng /
/// libjpeg. Errors carry the path.
Image8 ReadImage(const std::filesystem::path& path);

/// Gray plane in [0,1]; RGB collapsed with Rec.601 luminance weights.
Plane ToGrayPlane(const Image8& image);

/// Binary PGM (P5). Values are clamped to [0,1] and rounded to 0..255.
void WritePgm(const std::filesystem::path& path, const Plane& plane);

/// Bilinear resampling with half-pixel centers:
/// src = (dst + 0.5) * in / out - 0.5, clamped to the border.
Plane ResizeBilinear(const Plane& src, std::int64_t rows, std::int64_t cols);

}  // namespace starlk

#endif  // STARLK_IMAGE_HPP_
