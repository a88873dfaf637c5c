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

// Reference computations written independently of the library code paths.

#ifndef STARLK_TESTS_SUPPORT_ORACLES_HPP_
#define STARLK_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "starlk/image.hpp"
#include "starlk/mix/starmix.hpp"
#include "starlk/nn/ops.hpp"
#include "support/gradcheck.hpp"

namespace starlk::oracle {

inline double KahanSum(std::span<const double> values) {
  double sum = 0.0, carry = 0.0;
  for (double v : values) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

inline double KahanMean(std::span<const double> values) {
  return KahanSum(values) / static_cast<double>(values.size());
}

inline double GaussianProfile(double t, const mix::GaussianSpec& s) {
  if (s.mirrored) t = std::max(t, s.grid - 1 - t);
  const double d = t - s.k / 2.0;
  return std::exp(-d * d / (2.0 * s.sigma * s.sigma));
}

/// Pixel-by-pixel StarMask: three mirrored fields averaged, then
/// lambda * logistic.
inline Plane StarMaskDirect(double lambda, int h) {
  const mix::GaussianSpec specs[3] = {
      {static_cast<double>(h), lambda * h, h, true},
      {static_cast<double>(h), (1.0 - lambda) * h, h, true},
      {2.0 * h, lambda * h, h, true},
  };
  Plane g(h, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < h; ++c) {
      double m = 0.0;
      for (const auto& s : specs) m += GaussianProfile(r, s) * GaussianProfile(c, s);
      m /= 3.0;
      g.at(r, c) = lambda / (1.0 + std::exp(-m));
    }
  }
  return g;
}

/// Direct-sum grouped convolution with explicit top/left padding.
inline std::vector<double> NaiveConv(const nn::Tensor& x, const nn::Tensor& w, const nn::Conv2dOptions& o, int pt, int pl,
                              std::int64_t oh, std::int64_t ow) {
  const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(0), Cg = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  const auto og = O / o.groups;
  std::vector<double> out(static_cast<std::size_t>(B * O * oh * ow), 0.0);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t oc = 0; oc < O; ++oc)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t xx = 0; xx < ow; ++xx) {
          double s = 0.0;
          const auto g = oc / og;
          for (std::int64_t ic = 0; ic < Cg; ++ic)
            for (std::int64_t ky = 0; ky < KH; ++ky)
              for (std::int64_t kx = 0; kx < KW; ++kx) {
                const auto iy = y * o.stride + ky * o.dilation - pt;
                const auto ix = xx * o.stride + kx * o.dilation - pl;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const auto c = g * Cg + ic;
                s += x.data()[((b * C + c) * H + iy) * W + ix] * w.data()[((oc * Cg + ic) * KH + ky) * KW + kx];
              }
          out[((b * O + oc) * oh + y) * ow + xx] = s;
        }
  return out;
}

/// Bilinear sample with half-pixel centers and border clamping.
inline double BilinearAt(const Plane& src, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(src.rows - 1));
  x = std::clamp(x, 0.0, static_cast<double>(src.cols - 1));
  const auto y0 = static_cast<std::int64_t>(std::floor(y));
  const auto x0 = static_cast<std::int64_t>(std::floor(x));
  const auto y1 = std::min(y0 + 1, src.rows - 1);
  const auto x1 = std::min(x0 + 1, src.cols - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x1)) +
         fy * ((1 - fx) * src.at(y1, x0) + fx * src.at(y1, x1));
}

/// Exact FAR = FRR crossing of two empirical score sets by brute force over
/// every candidate threshold (each distinct score).
inline double BruteForceEer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  std::vector<double> cand(genuine);
  cand.insert(cand.end(), impostor.begin(), impostor.end());
  std::sort(cand.begin(), cand.end());
  double best = 1.0, gap = 2.0;
  for (double t : cand) {
    const double far = std::count_if(impostor.begin(), impostor.end(), [t](double s) { return s >= t; }) /
                       static_cast<double>(impostor.size());
    const double frr = std::count_if(genuine.begin(), genuine.end(), [t](double s) { return s < t; }) /
                       static_cast<double>(genuine.size());
    if (std::abs(far - frr) < gap) {
      gap = std::abs(far - frr);
      best = (far + frr) / 2.0;
    }
  }
  return best;
}

}  // namespace starlk::oracle

#endif  // STARLK_TESTS_SUPPORT_ORACLES_HPP_
