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

#include "starlk/mix/starmix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>

namespace starlk::mix {
namespace {

double PairwiseSum(std::span<const double> v) {
  if (v.size() <= 64) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return PairwiseSum(v.subspan(0, half)) + PairwiseSum(v.subspan(half));
}

double Logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void RequireSameShape(const char* what, const nn::Tensor& a, const nn::Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + " shape mismatch: " +
                                nn::ShapeString(a.shape()) + " vs " + nn::ShapeString(b.shape()));
  }
}

std::vector<double> Blend(std::span<const double> a, std::span<const double> b, double w) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = w * a[i] + (1.0 - w) * b[i];
  nn::RoundToPrecision(out);
  return out;
}

}  // namespace

void MixParams::Validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("mix alpha must be > 0");
  // Thresholds above 1 are allowed; they make the star path unreachable.
  if (!(0.0 <= threshold_lo && threshold_lo <= threshold_hi)) {
    throw std::invalid_argument("mix thresholds must satisfy 0 <= lo <= hi (got " +
                                std::to_string(threshold_lo) + ", " + std::to_string(threshold_hi) + ")");
  }
  if (mask_side <= 0) throw std::invalid_argument("mask side must be > 0");
}

Plane GaussianField(const GaussianSpec& spec) {
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw std::invalid_argument("gaussian sigma must be a positive finite value");
  }
  if (spec.grid <= 0) throw std::invalid_argument("gaussian grid must be > 0");
  if (!(spec.k > 0.0)) throw std::invalid_argument("gaussian kernel size must be > 0");
  const int n = spec.grid;
  const double center = spec.k / 2.0;
  const double denom = 2.0 * spec.sigma * spec.sigma;
  std::vector<double> profile(n);
  for (int t = 0; t < n; ++t) {
    const double u = spec.mirrored ? std::max(t, n - 1 - t) : t;
    profile[t] = std::exp(-(u - center) * (u - center) / denom);
  }
  Plane field(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) field.at(r, c) = profile[r] * profile[c];
  }
  return field;
}

StarMask BuildStarMask(double lambda, int width, int height) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("star mask lambda must lie in (0, 1), got " + std::to_string(lambda));
  }
  if (width != height) {
    throw std::invalid_argument("star mask requires square images, got " + std::to_string(width) +
                                "x" + std::to_string(height));
  }
  if (height <= 0) throw std::invalid_argument("star mask side must be > 0");
  const double h = height;
  const GaussianSpec specs[3] = {
      {h, lambda * h, height, true},
      {h, (1.0 - lambda) * h, height, true},
      {2.0 * h, lambda * h, height, true},
  };
  StarMask mask;
  mask.lambda = lambda;
  mask.M = Plane(height, height);
  for (const auto& spec : specs) {
    const Plane f = GaussianField(spec);
    for (std::size_t i = 0; i < f.values.size(); ++i) mask.M.values[i] += f.values[i];
  }
  for (double& v : mask.M.values) v /= 3.0;
  mask.G = Plane(height, height);
  for (std::size_t i = 0; i < mask.M.values.size(); ++i) {
    mask.G.values[i] = lambda * Logistic(mask.M.values[i]);
  }
  mask.lambda_hat = EffectiveLambda(mask.G);
  return mask;
}

double EffectiveLambda(const Plane& mask) {
  if (mask.empty()) throw std::invalid_argument("effective lambda of an empty mask");
  for (double v : mask.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("mask contains non-finite values");
  }
  return PairwiseSum(mask.values) / static_cast<double>(mask.values.size());
}

MixedPair MixupPair(const nn::Tensor& x_i, const nn::Tensor& y_i, const nn::Tensor& x_j,
                    const nn::Tensor& y_j, double lambda) {
  RequireSameShape("mixup image", x_i, x_j);
  RequireSameShape("mixup label", y_i, y_j);
  return {nn::Tensor::FromData(x_i.shape(), Blend(x_i.data(), x_j.data(), lambda)),
          nn::Tensor::FromData(y_i.shape(), Blend(y_i.data(), y_j.data(), lambda))};
}

MixedPair StarmixPair(const nn::Tensor& x_i, const nn::Tensor& y_i, const nn::Tensor& x_j,
                      const nn::Tensor& y_j, const StarMask& mask) {
  RequireSameShape("starmix image", x_i, x_j);
  RequireSameShape("starmix label", y_i, y_j);
  if (x_i.rank() < 2) throw std::invalid_argument("starmix image must have at least 2 axes");
  const auto h = x_i.dim(x_i.rank() - 2), w = x_i.dim(x_i.rank() - 1);
  if (h != mask.G.rows || w != mask.G.cols) {
    throw std::invalid_argument("starmix mask is " + std::to_string(mask.G.rows) + "x" +
                                std::to_string(mask.G.cols) + " but images are " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  const auto a = x_i.data(), b = x_j.data();
  const std::size_t plane = static_cast<std::size_t>(h * w);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = mask.G.values[i % plane];
    out[i] = g * a[i] + (1.0 - g) * b[i];
  }
  nn::RoundToPrecision(out);
  return {nn::Tensor::FromData(x_i.shape(), std::move(out)),
          nn::Tensor::FromData(y_i.shape(), Blend(y_i.data(), y_j.data(), mask.lambda_hat))};
}

std::shared_ptr<const StarMask> StarMaskCache::Get(double lambda, int side) {
  auto q = static_cast<std::int64_t>(std::llround(lambda / kQuantum));
  q = std::clamp<std::int64_t>(q, 1, static_cast<std::int64_t>(std::llround(1.0 / kQuantum)) - 1);
  const auto key = std::make_pair(q, side);
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = masks_.find(key);
  if (it != masks_.end()) return it->second;
  auto mask = std::make_shared<const StarMask>(BuildStarMask(static_cast<double>(q) * kQuantum, side, side));
  masks_.emplace(key, mask);
  return mask;
}

std::size_t StarMaskCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return masks_.size();
}

std::string ToString(MixPath path) { return path == MixPath::kStar ? "star" : "vanilla"; }

MixPath RoutePath(double lambda, const MixParams& params) {
  // The mask is undefined at lambda 0 and 1; those fall back to plain mixing.
  const bool in_band = params.threshold_lo <= lambda && lambda <= params.threshold_hi;
  return (in_band && lambda > 0.0 && lambda < 1.0) ? MixPath::kStar : MixPath::kVanilla;
}

double SampleLambda(const MixParams& params, Rng& rng) { return rng.SymmetricBeta(params.alpha); }

MixedBatch MixBatch(const nn::Tensor& images, const nn::Tensor& labels, const MixParams& params,
                    Rng& rng, const MixBatchOptions& options) {
  params.Validate();
  if (images.rank() != 4) {
    throw std::invalid_argument("mix batch images must be [B,C,H,W], got " + nn::ShapeString(images.shape()));
  }
  if (labels.rank() != 2 || labels.dim(0) != images.dim(0)) {
    throw std::invalid_argument("mix batch labels must be [B,K] matching the image batch, got " +
                                nn::ShapeString(labels.shape()));
  }
  const std::int64_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  const std::int64_t K = labels.dim(1);
  if (B < 2) throw std::invalid_argument("mixing needs a batch of at least 2 samples");

  MixedBatch out;
  out.lambda_raw = options.forced_lambda ? *options.forced_lambda : SampleLambda(params, rng);
  if (!(out.lambda_raw >= 0.0 && out.lambda_raw <= 1.0)) {
    throw std::invalid_argument("mixing lambda must lie in [0, 1]");
  }
  out.permutation = rng.Permutation(B);
  out.path = RoutePath(out.lambda_raw, params);

  if (out.path == MixPath::kStar) {
    if (H != W) {
      throw std::invalid_argument("star path requires square images, got " + std::to_string(H) +
                                  "x" + std::to_string(W));
    }
    out.mask = options.cache
                   ? options.cache->Get(out.lambda_raw, static_cast<int>(H))
                   : std::make_shared<const StarMask>(
                         BuildStarMask(out.lambda_raw, static_cast<int>(W), static_cast<int>(H)));
    out.lambda_effective = out.mask->lambda_hat;
  } else {
    out.lambda_effective = out.lambda_raw;
  }

  const auto x = images.data(), y = labels.data();
  const std::int64_t image_size = C * H * W;
  const std::int64_t plane = H * W;
  std::vector<double> mixed(x.size()), soft(y.size());
  const double lam = out.lambda_effective;
  for (std::int64_t i = 0; i < B; ++i) {
    const std::int64_t j = out.permutation[i];
    const double* xi = x.data() + i * image_size;
    const double* xj = x.data() + j * image_size;
    double* dst = mixed.data() + i * image_size;
    if (out.mask) {
      const auto& g = out.mask->G.values;
      for (std::int64_t k = 0; k < image_size; ++k) {
        const double gk = g[k % plane];
        dst[k] = gk * xi[k] + (1.0 - gk) * xj[k];
      }
    } else {
      for (std::int64_t k = 0; k < image_size; ++k) dst[k] = lam * xi[k] + (1.0 - lam) * xj[k];
    }
    for (std::int64_t c = 0; c < K; ++c) {
      soft[i * K + c] = lam * y[i * K + c] + (1.0 - lam) * y[j * K + c];
    }
  }
  nn::RoundToPrecision(mixed);
  nn::RoundToPrecision(soft);
  out.images = nn::Tensor::FromData(images.shape(), std::move(mixed));
  out.soft_labels = nn::Tensor::FromData(labels.shape(), std::move(soft));
  return out;
}

void ExportMaskPreview(const StarMask& mask, const MixParams& params,
                       const std::filesystem::path& stem) {
  Plane scaled = mask.G;
  for (double& v : scaled.values) v /= mask.lambda;
  auto pgm = stem;
  pgm += ".pgm";
  WritePgm(pgm, scaled);
  auto txt = stem;
  txt += ".txt";
  std::ofstream out(txt, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + txt.string() + "' for writing");
  out.precision(17);
  out << "lambda=" << mask.lambda << "\n"
      << "lambda_hat=" << mask.lambda_hat << "\n"
      << "threshold_lo=" << params.threshold_lo << "\n"
      << "threshold_hi=" << params.threshold_hi << "\n"
      << "path=" << ToString(RoutePath(mask.lambda, params)) << "\n"
      << "side=" << mask.G.rows << "\n";
}

}  // namespace starlk::mix
