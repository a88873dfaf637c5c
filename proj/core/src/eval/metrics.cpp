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

#include "starlk/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "starlk/nn/ops.hpp"
#include "starlk/rng.hpp"

namespace starlk::eval {
namespace {

// Restores the model mode on scope exit.
class ModeGuard {
 public:
  ModeGuard(laknet::Model& model, nn::Mode mode) : model_(model), saved_(model.mode()) { model.SetMode(mode); }
  ~ModeGuard() { model_.SetMode(saved_); }
  ModeGuard(const ModeGuard&) = delete;
  ModeGuard& operator=(const ModeGuard&) = delete;

 private:
  laknet::Model& model_;
  nn::Mode saved_;
};

void RequireImages(const char* what, const nn::Tensor& images, std::size_t labels) {
  if (images.rank() != 4) {
    throw std::invalid_argument(std::string(what) + ": images must be [N,C,S,S], got " +
                                nn::ShapeString(images.shape()));
  }
  if (labels != static_cast<std::size_t>(images.dim(0))) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(labels) + " labels for " +
                                std::to_string(images.dim(0)) + " images");
  }
}

nn::Tensor Slice(const nn::Tensor& images, std::int64_t begin, std::int64_t end) {
  const std::int64_t per = images.numel() / images.dim(0);
  const auto src = images.data();
  std::vector<double> v(src.begin() + begin * per, src.begin() + end * per);
  nn::Shape s = images.shape();
  s[0] = end - begin;
  return nn::Tensor::FromData(s, std::move(v));
}

std::string Fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return buf;
}

}  // namespace

std::int64_t Argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty row");
  std::int64_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<std::int64_t>(i);
  }
  return best;
}

double Top1(const nn::Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw std::invalid_argument("top1: logits " + nn::ShapeString(logits.shape()) + " do not match " +
                                std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument("top1 of an empty batch");
  const std::int64_t k = logits.dim(1);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (Argmax(logits.data().subspan(i * k, k)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::string EpochHistory::ToCsv() const {
  std::string out = "epoch,loss,top1,lr\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + Fixed(e.loss) + "," + Fixed(e.top1) + "," + Fixed(e.lr) + "\n";
  }
  return out;
}

double Median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FinalTop1 FinalTop1Of(const EpochHistory& history) {
  if (history.epochs.empty()) throw std::invalid_argument("final top-1 of an empty history");
  const std::size_t n = history.epochs.size();
  const std::size_t first = n >= 10 ? n - 10 : 0;
  std::vector<double> window;
  for (std::size_t i = first; i < n; ++i) window.push_back(history.epochs[i].top1);
  return {Median(std::move(window)), n >= 10};
}

double Accuracy(laknet::Model& model, const nn::Tensor& images, std::span<const int> labels, int batch) {
  RequireImages("accuracy", images, labels.size());
  if (labels.empty()) throw std::invalid_argument("accuracy over an empty set");
  if (batch <= 0) throw std::invalid_argument("batch must be > 0");
  ModeGuard mode(model, nn::Mode::kEval);
  nn::NoGradGuard no_grad;
  const std::int64_t n = images.dim(0);
  std::int64_t correct = 0;
  for (std::int64_t b = 0; b < n; b += batch) {
    const std::int64_t e = std::min(n, b + batch);
    const nn::Tensor logits = model.Forward(Slice(images, b, e));
    const std::int64_t k = logits.dim(1);
    for (std::int64_t i = b; i < e; ++i) {
      if (Argmax(logits.data().subspan((i - b) * k, k)) == labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

nn::Tensor Embed(laknet::Model& model, const nn::Tensor& images, int batch) {
  if (images.rank() != 4) throw std::invalid_argument("embed: images must be [N,C,S,S]");
  if (batch <= 0) throw std::invalid_argument("batch must be > 0");
  ModeGuard mode(model, nn::Mode::kEval);
  nn::NoGradGuard no_grad;
  const std::int64_t n = images.dim(0);
  std::vector<double> out;
  std::int64_t f = 0;
  for (std::int64_t b = 0; b < n; b += batch) {
    const nn::Tensor feats = model.Run(Slice(images, b, std::min(n, b + batch))).features;
    f = feats.dim(1);
    out.insert(out.end(), feats.data().begin(), feats.data().end());
  }
  return nn::Tensor::FromData({n, f}, std::move(out));
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ScoreSet ScorePairs(const nn::Tensor& embeddings, std::span<const int> labels, const PairingPolicy& policy) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw std::invalid_argument("score_pairs: embeddings " + nn::ShapeString(embeddings.shape()) +
                                " do not match " + std::to_string(labels.size()) + " labels");
  }
  if (policy.impostor_ratio < 0.0 || policy.max_genuine < 0) {
    throw std::invalid_argument("score_pairs: pairing policy limits must be >= 0");
  }
  const std::int64_t n = embeddings.dim(0), f = embeddings.dim(1);
  auto row = [&](std::int64_t i) { return embeddings.data().subspan(i * f, f); };
  Rng rng(policy.seed);
  ScoreSet set;

  std::vector<std::pair<std::int64_t, std::int64_t>> genuine;
  std::vector<int> per_class;
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0) throw std::invalid_argument("score_pairs: negative label");
    if (labels[i] >= static_cast<int>(per_class.size())) per_class.resize(labels[i] + 1);
    per_class[labels[i]]++;
    for (std::int64_t j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) genuine.emplace_back(i, j);
    }
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c] == 1) {
      set.warnings.push_back("class " + std::to_string(c) + " has a single image and contributes no genuine pairs");
    }
  }
  Rng genuine_rng = rng.Derive(1);
  if (static_cast<std::int64_t>(genuine.size()) > policy.max_genuine) {
    for (std::int64_t k = 0; k < policy.max_genuine; ++k) {
      const auto pick = k + genuine_rng.UniformInt(static_cast<std::int64_t>(genuine.size()) - k);
      std::swap(genuine[k], genuine[pick]);
    }
    genuine.resize(policy.max_genuine);
    std::sort(genuine.begin(), genuine.end());
  }
  for (const auto& [i, j] : genuine) set.genuine.push_back(Cosine(row(i), row(j)));

  const bool mixed = std::count_if(per_class.begin(), per_class.end(), [](int c) { return c > 0; }) >= 2;
  const auto want = static_cast<std::int64_t>(std::llround(policy.impostor_ratio * static_cast<double>(genuine.size())));
  if (!mixed && want > 0) set.warnings.push_back("a single class is present; no impostor pairs exist");
  Rng impostor_rng = rng.Derive(2);
  for (std::int64_t k = 0; mixed && k < want; ++k) {
    std::int64_t i, j;
    do {
      i = impostor_rng.UniformInt(n);
      j = impostor_rng.UniformInt(n);
    } while (labels[i] == labels[j]);
    set.impostor.push_back(Cosine(row(i), row(j)));
  }
  return set;
}

RocCurve SweepRoc(const ScoreSet& scores, int num_thresholds) {
  if (num_thresholds < 2) throw std::invalid_argument("sweep_roc needs at least 2 thresholds");
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw std::invalid_argument("sweep_roc needs non-empty genuine and impostor scores");
  }
  std::vector<double> gen = scores.genuine, imp = scores.impostor;
  for (const auto* v : {&gen, &imp}) {
    for (double s : *v) {
      if (!std::isfinite(s)) throw std::invalid_argument("sweep_roc: non-finite score");
    }
  }
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  const double lo = std::min(gen.front(), imp.front());
  const double hi = std::max(gen.back(), imp.back());

  RocCurve curve;
  auto& t = curve.thresholds;
  for (int k = 0; k < num_thresholds; ++k) {
    t.push_back(k + 1 == num_thresholds ? hi : lo + (hi - lo) * k / (num_thresholds - 1));
  }
  std::vector<double> distinct;
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(distinct));
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= 10000) t.insert(t.end(), distinct.begin(), distinct.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());

  const double ng = static_cast<double>(gen.size()), ni = static_cast<double>(imp.size());
  for (double th : t) {
    const auto imp_below = std::lower_bound(imp.begin(), imp.end(), th) - imp.begin();
    const auto gen_below = std::lower_bound(gen.begin(), gen.end(), th) - gen.begin();
    curve.far.push_back((ni - static_cast<double>(imp_below)) / ni);
    curve.frr.push_back(static_cast<double>(gen_below) / ng);
  }

  // FAR - FRR is non-increasing; find where it first reaches zero.
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double d = curve.far[k] - curve.frr[k];
    if (d > 0.0) continue;
    if (d == 0.0 || k == 0) {
      curve.eer = 0.5 * (curve.far[k] + curve.frr[k]);
      curve.eer_threshold = t[k];
      return curve;
    }
    const double dp = curve.far[k - 1] - curve.frr[k - 1];
    const double a = dp / (dp - d);
    const double far = curve.far[k - 1] + a * (curve.far[k] - curve.far[k - 1]);
    const double frr = curve.frr[k - 1] + a * (curve.frr[k] - curve.frr[k - 1]);
    curve.eer = 0.5 * (far + frr);
    curve.eer_threshold = t[k - 1] + a * (t[k] - t[k - 1]);
    return curve;
  }
  // No crossing inside the sweep: take the closest point.
  std::size_t best = 0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (std::abs(curve.far[k] - curve.frr[k]) < std::abs(curve.far[best] - curve.frr[best])) best = k;
  }
  curve.eer = 0.5 * (curve.far[best] + curve.frr[best]);
  curve.eer_threshold = t[best];
  return curve;
}

void WriteRocCsv(const RocCurve& curve, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  out << "threshold,far,frr\n";
  char buf[128];
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.10f,%.10f,%.10f\n", curve.thresholds[k], curve.far[k], curve.frr[k]);
    out << buf;
  }
}

std::string EerSummary(const RocCurve& curve, const ScoreSet& scores) {
  nlohmann::ordered_json j;
  j["eer"] = curve.eer;
  j["eer_threshold"] = curve.eer_threshold;
  j["score"] = scores.score_tag;
  j["genuine_pairs"] = scores.genuine.size();
  j["impostor_pairs"] = scores.impostor.size();
  j["thresholds"] = curve.thresholds.size();
  return j.dump(2) + "\n";
}

int OcclusionPatchCount(int side, int patch, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("occlusion ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  if (patch <= 0 || patch > side) {
    throw std::invalid_argument("occlusion patch side " + std::to_string(patch) + " must lie in 1.." +
                                std::to_string(side));
  }
  return static_cast<int>(std::lround(ratio * side * side / (static_cast<double>(patch) * patch)));
}

void OccludeImage(std::span<double> image, int channels, int side, int patch, int count, Rng& rng) {
  if (image.size() != static_cast<std::size_t>(channels) * side * side) {
    throw std::invalid_argument("occlude: image buffer does not match its shape");
  }
  struct Box {
    std::int64_t y, x;
  };
  std::vector<Box> placed;
  const std::int64_t span = side - patch + 1;
  for (int p = 0; p < count; ++p) {
    Box box{0, 0};
    for (int attempt = 0; attempt < 10; ++attempt) {
      box = {rng.UniformInt(span), rng.UniformInt(span)};
      const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const Box& o) {
        return std::abs(o.y - box.y) < patch && std::abs(o.x - box.x) < patch;
      });
      if (!overlaps) break;
    }
    placed.push_back(box);
    for (int c = 0; c < channels; ++c) {
      double* plane = image.data() + static_cast<std::size_t>(c) * side * side;
      for (std::int64_t y = box.y; y < box.y + patch; ++y) {
        std::fill(plane + y * side + box.x, plane + y * side + box.x + patch, 0.0);
      }
    }
  }
}

std::string OcclusionReport::ToCsv() const {
  std::string out = "ratio,accuracy\n";
  for (std::size_t k = 0; k < ratios.size(); ++k) out += Fixed(ratios[k]) + "," + Fixed(accuracy[k]) + "\n";
  return out;
}

OcclusionReport OcclusionSweep(laknet::Model& model, const nn::Tensor& images, std::span<const int> labels,
                               const OcclusionOptions& options) {
  RequireImages("occlusion", images, labels.size());
  if (images.dim(2) != images.dim(3)) throw std::invalid_argument("occlusion needs square images");
  const int channels = static_cast<int>(images.dim(1));
  const int side = static_cast<int>(images.dim(2));
  OcclusionReport report;
  report.patch_side = options.patch_side;
  report.seed = options.seed;
  const Rng master(options.seed);
  for (std::size_t r = 0; r < options.ratios.size(); ++r) {
    const int count = OcclusionPatchCount(side, options.patch_side, options.ratios[r]);
    report.ratios.push_back(options.ratios[r]);
    report.patch_counts.push_back(count);
    if (count == 0) {
      report.accuracy.push_back(Accuracy(model, images, labels, options.batch));
      continue;
    }
    std::vector<double> occluded(images.data().begin(), images.data().end());
    const std::size_t per = static_cast<std::size_t>(channels) * side * side;
    const Rng ratio_rng = master.Derive(r);
    for (std::int64_t i = 0; i < images.dim(0); ++i) {
      Rng rng = ratio_rng.Derive(static_cast<std::uint64_t>(i));
      OccludeImage(std::span<double>(occluded).subspan(i * per, per), channels, side, options.patch_side, count, rng);
    }
    report.accuracy.push_back(
        Accuracy(model, nn::Tensor::FromData(images.shape(), std::move(occluded)), labels, options.batch));
  }
  return report;
}

int DefaultCamStage(const laknet::LaKNetConfig& config) {
  // Stage k (0-based) runs at input_side / 2^(k+2).
  for (int k = 3; k >= 0; --k) {
    if ((config.input_side >> (k + 2)) >= 2) return k;
  }
  return 0;
}

void NormalizeMinMax(Plane& map) {
  if (map.empty()) return;
  const auto [mn, mx] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *mn, hi = *mx;
  if (hi > lo) {
    for (double& v : map.values) v = (v - lo) / (hi - lo);
    // Guard the endpoints against rounding.
    for (double& v : map.values) v = std::clamp(v, 0.0, 1.0);
    return;
  }
  std::fill(map.values.begin(), map.values.end(), hi > 0.0 ? 1.0 : 0.0);
}

Plane ActivationMap(laknet::Model& model, const nn::Tensor& image, int class_index, std::optional<int> stage) {
  const auto& cfg = model.config();
  if (image.rank() != 4 || image.dim(0) != 1) {
    throw std::invalid_argument("activation map expects one [1,C,S,S] image, got " + nn::ShapeString(image.shape()));
  }
  if (class_index < 0 || class_index >= cfg.num_classes) {
    throw std::invalid_argument("class index " + std::to_string(class_index) + " outside 0.." +
                                std::to_string(cfg.num_classes - 1));
  }
  const int target = stage.value_or(DefaultCamStage(cfg));
  if (target < 0 || target > 3) throw std::invalid_argument("CAM stage must be 0..3, got " + std::to_string(target));

  ModeGuard mode(model, nn::Mode::kEval);
  nn::Tensor activation;
  laknet::ForwardOptions opts;
  opts.stage_hook = [&](int s, const nn::Tensor& out) {
    if (s != target) return out;
    activation = nn::Tensor::FromData(out.shape(), std::vector<double>(out.data().begin(), out.data().end()), true);
    return activation;
  };
  const nn::Tensor logits = model.Run(image, opts).logits;
  const std::int64_t h = activation.dim(2), w = activation.dim(3), c = activation.dim(1);
  if (h < 2 || w < 2) {
    model.ZeroGrad();
    throw std::invalid_argument("CAM stage " + std::to_string(target) + " output is " + std::to_string(h) + "x" +
                                std::to_string(w) + "; at least 2x2 is required");
  }
  nn::Pick(logits, class_index).Backward();
  model.ZeroGrad();

  const auto a = activation.data();
  const auto g = activation.grad();
  Plane cam(h, w);
  for (std::int64_t k = 0; k < c; ++k) {
    double weight = 0.0;
    for (std::int64_t i = 0; i < h * w; ++i) weight += g[k * h * w + i];
    weight /= static_cast<double>(h * w);
    for (std::int64_t i = 0; i < h * w; ++i) cam.values[i] += weight * a[k * h * w + i];
  }
  for (double& v : cam.values) v = std::max(v, 0.0);
  Plane up = ResizeBilinear(cam, image.dim(2), image.dim(3));
  NormalizeMinMax(up);
  return up;
}

}  // namespace starlk::eval
