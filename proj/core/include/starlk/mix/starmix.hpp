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

#ifndef STARLK_MIX_STARMIX_HPP_
#define STARLK_MIX_STARMIX_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starlk/image.hpp"
#include "starlk/nn/tensor.hpp"
#include "starlk/rng.hpp"

namespace starlk::mix {

/// Mixing hyperparameters. The star path is taken iff
/// threshold_lo <= lambda <= threshold_hi (closed interval).
struct MixParams {
  double alpha = 1.0;
  double threshold_lo = 0.3;
  double threshold_hi = 0.7;
  int mask_side = 224;
  std::uint64_t rng_seed = 0;

  void Validate() const;
};

/// One separable Gaussian profile g(t) = exp(-(t - k/2)^2 / (2 sigma^2))
/// sampled on t = 0..grid-1; the field is g(r) * g(c).
///
/// With `mirrored` set, t is replaced by max(t, grid-1-t): the profile on the
/// lower/right half is reflected onto the upper/left half, which makes the
/// field symmetric under both flips. A k = 2*grid profile then brightens all
/// four borders instead of a single corner.
struct GaussianSpec {
  double k = 224.0;
  double sigma = 1.0;
  int grid = 224;
  bool mirrored = false;
};

Plane GaussianField(const GaussianSpec& spec);

/// Mask G with its intermediate average field M and ratios.
struct StarMask {
  Plane G;
  Plane M;
  double lambda = 0.0;
  double lambda_hat = 0.0;
};

/// M = mean of three mirrored fields (k=h, sigma=lambda*h), (k=h,
/// sigma=(1-lambda)*h), (k=2h, sigma=lambda*h); G = lambda * logistic(M);
/// lambda_hat = mean(G). Requires 0 < lambda < 1 and w == h.
StarMask BuildStarMask(double lambda, int width, int height);

/// Mean of all mask entries (pairwise summation).
double EffectiveLambda(const Plane& mask);

struct MixedPair {
  nn::Tensor image;
  nn::Tensor label;
};

/// lambda * (x_i, y_i) + (1 - lambda) * (x_j, y_j), elementwise.
MixedPair MixupPair(const nn::Tensor& x_i, const nn::Tensor& y_i, const nn::Tensor& x_j,
                    const nn::Tensor& y_j, double lambda);

/// x = G*x_i + (1-G)*x_j with G broadcast over leading axes (the last two
/// image axes must match the mask); y mixed with the mask's lambda_hat.
MixedPair StarmixPair(const nn::Tensor& x_i, const nn::Tensor& y_i, const nn::Tensor& x_j,
                      const nn::Tensor& y_j, const StarMask& mask);

/// Memoizes masks on (lambda rounded to 1e-4, side). The cached mask is built
/// from the rounded lambda, so a lookup never depends on call order.
class StarMaskCache {
 public:
  static constexpr double kQuantum = 1e-4;

  std::shared_ptr<const StarMask> Get(double lambda, int side);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::int64_t, int>, std::shared_ptr<const StarMask>> masks_;
};

enum class MixPath { kStar, kVanilla };
std::string ToString(MixPath path);

struct MixedBatch {
  nn::Tensor images;       // [B,C,H,W]
  nn::Tensor soft_labels;  // [B,K]
  MixPath path = MixPath::kVanilla;
  double lambda_raw = 0.0;
  double lambda_effective = 0.0;
  std::vector<std::int64_t> permutation;  // sample i is paired with permutation[i]
  std::shared_ptr<const StarMask> mask;   // set on the star path
};

/// Selects the path for a given lambda.
MixPath RoutePath(double lambda, const MixParams& params);

/// Draws lambda ~ Beta(alpha, alpha).
double SampleLambda(const MixParams& params, Rng& rng);

struct MixBatchOptions {
  std::optional<double> forced_lambda;  // skips the Beta draw
  StarMaskCache* cache = nullptr;
};

/// One lambda and one permutation per batch (in that draw order); one mask
/// per batch on the star path. Inputs are not modified.
MixedBatch MixBatch(const nn::Tensor& images, const nn::Tensor& labels, const MixParams& params,
                    Rng& rng, const MixBatchOptions& options = {});

/// Writes `stem`.pgm with G/lambda scaled to [0,255] and `stem`.txt with
/// lambda, lambda_hat, thresholds and the selected path.
void ExportMaskPreview(const StarMask& mask, const MixParams& params,
                       const std::filesystem::path& stem);

}  // namespace starlk::mix

#endif  // STARLK_MIX_STARMIX_HPP_
