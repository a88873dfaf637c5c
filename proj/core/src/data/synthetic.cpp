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

#include "starlk/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace starlk::data {
namespace fs = std::filesystem;
namespace {

constexpr int kSegments = 24;
constexpr std::uint64_t kTemplateStream = 0x7e3a;
constexpr std::uint64_t kImageStream = 0x51ce;

struct Point {
  double x, y;
};

struct Vein {
  std::vector<Point> polyline;
  double thickness;
};

Point Bezier(const Point (&p)[4], double t) {
  const double u = 1.0 - t;
  const double a = u * u * u, b = 3 * u * u * t, c = 3 * u * t * t, d = t * t * t;
  return {a * p[0].x + b * p[1].x + c * p[2].x + d * p[3].x, a * p[0].y + b * p[1].y + c * p[2].y + d * p[3].y};
}

// Class template: curves crossing the frame, in pixel units.
std::vector<Vein> ClassTemplate(const SyntheticVeinSpec& spec, int class_index) {
  Rng rng = Rng(spec.seed).Derive(kTemplateStream).Derive(static_cast<std::uint64_t>(class_index));
  const double s = spec.side;
  const int count = spec.min_veins + static_cast<int>(rng.UniformInt(spec.max_veins - spec.min_veins + 1));
  std::vector<Vein> veins;
  for (int v = 0; v < count; ++v) {
    Point ctrl[4] = {
        {rng.Uniform(-0.1, 0.1) * s, rng.Uniform(0.0, 1.0) * s},
        {rng.Uniform(0.2, 0.45) * s, rng.Uniform(0.0, 1.0) * s},
        {rng.Uniform(0.55, 0.8) * s, rng.Uniform(0.0, 1.0) * s},
        {rng.Uniform(0.9, 1.1) * s, rng.Uniform(0.0, 1.0) * s},
    };
    if (rng.Bernoulli(0.5)) {
      for (auto& p : ctrl) std::swap(p.x, p.y);
    }
    Vein vein;
    vein.thickness = rng.Uniform(spec.min_thickness, spec.max_thickness);
    for (int k = 0; k <= kSegments; ++k) vein.polyline.push_back(Bezier(ctrl, static_cast<double>(k) / kSegments));
    veins.push_back(std::move(vein));
  }
  return veins;
}

double SegmentDistance2(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx, dy = wy - t * vy;
  return dx * dx + dy * dy;
}

}  // namespace

void SyntheticVeinSpec::Validate() const {
  if (num_classes < 1) throw std::invalid_argument("synthetic num_classes must be >= 1");
  if (images_per_class < 1) throw std::invalid_argument("synthetic images_per_class must be >= 1");
  if (side < 4) throw std::invalid_argument("synthetic side must be >= 4");
  if (min_veins < 1 || max_veins < min_veins) throw std::invalid_argument("synthetic vein count range is invalid");
  if (!(min_thickness > 0.0) || max_thickness < min_thickness) {
    throw std::invalid_argument("synthetic thickness range is invalid");
  }
  if (!(contrast > 0.0 && contrast <= 1.0)) throw std::invalid_argument("synthetic contrast must lie in (0,1]");
  if (contrast_jitter < 0.0 || noise < 0.0 || max_shift < 0.0) {
    throw std::invalid_argument("synthetic jitter, noise and shift must be >= 0");
  }
}

Plane RenderSyntheticVein(const SyntheticVeinSpec& spec, int class_index, int image_index) {
  spec.Validate();
  const auto veins = ClassTemplate(spec, class_index);
  Rng rng = Rng(spec.seed)
                .Derive(kImageStream)
                .Derive(static_cast<std::uint64_t>(class_index) * 1000003ULL + static_cast<std::uint64_t>(image_index));
  const double dx = rng.Uniform(-spec.max_shift, spec.max_shift);
  const double dy = rng.Uniform(-spec.max_shift, spec.max_shift);
  const double depth = spec.contrast * (1.0 + rng.Uniform(-spec.contrast_jitter, spec.contrast_jitter));
  const double background = 0.8 + rng.Uniform(-0.05, 0.05);

  Plane img(spec.side, spec.side);
  for (int y = 0; y < spec.side; ++y) {
    for (int x = 0; x < spec.side; ++x) {
      // Sample the template at the shifted pixel center.
      const Point p{x + 0.5 - dx, y + 0.5 - dy};
      double dark = 0.0;
      for (const auto& v : veins) {
        double d2 = INFINITY;
        for (std::size_t k = 0; k + 1 < v.polyline.size(); ++k) {
          d2 = std::min(d2, SegmentDistance2(p, v.polyline[k], v.polyline[k + 1]));
        }
        dark = std::max(dark, std::exp(-d2 / (2.0 * v.thickness * v.thickness)));
      }
      img.at(y, x) = background - depth * dark;
    }
  }
  for (double& v : img.values) v = std::clamp(v + rng.Normal(0.0, spec.noise), 0.0, 1.0);
  return img;
}

DatasetManifest GenerateSynthetic(const SyntheticVeinSpec& spec, const fs::path& out_root) {
  spec.Validate();
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec || !fs::is_directory(out_root)) {
    throw std::runtime_error("cannot create output directory '" + out_root.string() + "'");
  }
  DatasetManifest m;
  m.root = out_root;
  m.image_side = spec.side;
  char buf[64];
  for (int c = 0; c < spec.num_classes; ++c) {
    std::snprintf(buf, sizeof(buf), "class_%03d", c);
    const std::string cls = buf;
    m.classes.push_back(cls);
    for (int i = 0; i < spec.images_per_class; ++i) {
      const std::string session = (i % 2 == 0) ? "session_1" : "session_2";
      std::snprintf(buf, sizeof(buf), "img_%03d.pgm", i);
      const std::string rel = cls + "/" + session + "/" + buf;
      fs::create_directories(out_root / cls / session, ec);
      if (ec) throw std::runtime_error("cannot create '" + (out_root / cls / session).string() + "'");
      WritePgm(out_root / rel, RenderSyntheticVein(spec, c, i));
      // A single image cannot fill both sessions; it is listed as train.
      const Split split = (i % 2 == 0) ? Split::kTrain : Split::kTest;
      m.entries.push_back({rel, c, session, split});
    }
  }
  DatasetManifest listed = m;
  listed.root = out_root;
  WriteManifest(listed, out_root / "manifest.txt");
  return m;
}

}  // namespace starlk::data
