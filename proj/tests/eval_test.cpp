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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "starlk/eval/metrics.hpp"
#include "starlk/nn/ops.hpp"
#include "support/oracles.hpp"

using namespace starlk;

namespace {

eval::EpochHistory HistoryOf(const std::vector<double>& top1) {
  eval::EpochHistory h;
  for (std::size_t i = 0; i < top1.size(); ++i) h.epochs.push_back({static_cast<int>(i), 1.0, top1[i], 0.1});
  return h;
}

std::vector<double> Normals(Rng& rng, int n, double mean, double sd) {
  std::vector<double> v(n);
  for (double& x : v) x = mean + sd * rng.Normal();
  return v;
}

nn::Tensor RandomImages(int n, int side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n) * side * side);
  for (double& x : v) x = rng.Uniform();
  return nn::Tensor::FromData({n, 1, side, side}, v);
}

}  // namespace

TEST_CASE("argmax breaks ties toward the lowest index") {
  const std::vector<double> tie{0.5, 0.5};
  CHECK(eval::Argmax(tie) == 0);
  const std::vector<double> v{-1, 3, 3, 2};
  CHECK(eval::Argmax(v) == 1);
  const auto logits = nn::Tensor::FromData({2, 2}, {0.5, 0.5, 0.1, 0.2});
  const std::vector<int> labels{0, 0};
  CHECK(eval::Top1(logits, labels) == 0.5);
}

TEST_CASE("final top-1 is the median of the last ten epochs") {
  CHECK(eval::FinalTop1Of(HistoryOf(std::vector<double>(10, 90))).value == 90);
  std::vector<double> ramp(10);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  CHECK(eval::FinalTop1Of(HistoryOf(ramp)).value == 5.5);

  std::vector<double> long_run{0, 0, 0, 0, 0};
  long_run.insert(long_run.end(), ramp.begin(), ramp.end());
  const auto full = eval::FinalTop1Of(HistoryOf(long_run));
  CHECK(full.value == 5.5);
  CHECK(full.full_window);
  std::reverse(long_run.begin() + 5, long_run.end());
  CHECK(eval::FinalTop1Of(HistoryOf(long_run)).value == 5.5);

  const auto short_run = eval::FinalTop1Of(HistoryOf({3, 1, 2}));
  CHECK(short_run.value == 2);
  CHECK_FALSE(short_run.full_window);
  CHECK_THROWS(eval::FinalTop1Of(eval::EpochHistory{}));
  CHECK(eval::Median({4, 1, 3}) == 3);
}

TEST_CASE("history csv layout") {
  const auto csv = HistoryOf({0.5}).ToCsv();
  CHECK(csv == "epoch,loss,top1,lr\n0,1.0000000000,0.5000000000,0.1000000000\n");
}

TEST_CASE("cosine similarity") {
  const std::vector<double> a{1, 2, 3}, b{2, 4, 6}, c{-3, 0, 1}, z{0, 0, 0};
  CHECK(eval::Cosine(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval::Cosine(a, c) == 0.0);
  CHECK(eval::Cosine(a, z) == 0.0);
}

TEST_CASE("pair counting") {
  const auto emb = nn::Tensor::FromData({6, 2}, {1, 0, 1, 0.1, 0, 1, 0.1, 1, 1, 1, 1, 0.9});
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  eval::PairingPolicy policy;
  const auto s = eval::ScorePairs(emb, labels, policy);
  CHECK(s.genuine.size() == 3);
  CHECK(s.impostor.size() == 30);
  CHECK(s.warnings.empty());
  CHECK(s.score_tag == "cosine");
  const auto again = eval::ScorePairs(emb, labels, policy);
  CHECK(again.impostor == s.impostor);

  policy.impostor_ratio = 1.0;
  CHECK(eval::ScorePairs(emb, labels, policy).impostor.size() == 3);
  policy.max_genuine = 2;
  CHECK(eval::ScorePairs(emb, labels, policy).genuine.size() == 2);

  const std::vector<int> lone{0, 0, 1, 1, 2, 3};
  const auto w = eval::ScorePairs(emb, lone, {});
  CHECK(w.genuine.size() == 2);
  CHECK(w.warnings.size() == 2);
}

TEST_CASE("EER of separated Gaussians matches the normal CDF crossing") {
  Rng rng(11);
  eval::ScoreSet s;
  s.genuine = Normals(rng, 100000, 1.0, 0.5);
  s.impostor = Normals(rng, 100000, 0.0, 0.5);
  const auto roc = eval::SweepRoc(s);
  const double expected = 0.5 * std::erfc(1.0 / std::sqrt(2.0));
  MESSAGE("EER " << roc.eer << " expected " << expected);
  CHECK(std::abs(roc.eer - expected) < 0.01);
  CHECK(std::abs(roc.eer_threshold - 0.5) < 0.02);
}

TEST_CASE("EER edge distributions") {
  Rng rng(3);
  eval::ScoreSet disjoint;
  for (int i = 0; i < 500; ++i) {
    disjoint.genuine.push_back(2.0 + rng.Uniform());
    disjoint.impostor.push_back(rng.Uniform());
  }
  CHECK(eval::SweepRoc(disjoint).eer == 0.0);

  eval::ScoreSet same;
  same.genuine = Normals(rng, 10000, 0.0, 1.0);
  same.impostor = Normals(rng, 10000, 0.0, 1.0);
  CHECK(std::abs(eval::SweepRoc(same).eer - 0.5) < 0.02);

  CHECK_THROWS(eval::SweepRoc(eval::ScoreSet{}));
  CHECK_THROWS(eval::SweepRoc(disjoint, 1));
}

TEST_CASE("EER agrees with a brute-force crossing") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    eval::ScoreSet s;
    s.genuine = Normals(rng, 300, 0.8, 0.6);
    s.impostor = Normals(rng, 900, 0.0, 0.6);
    const double ours = eval::SweepRoc(s).eer;
    const double brute = oracle::BruteForceEer(s.genuine, s.impostor);
    CHECK(std::abs(ours - brute) < 2.0 / 300);
  }
}

TEST_CASE("ROC curve properties") {
  Rng rng(5);
  eval::ScoreSet s;
  s.genuine = Normals(rng, 400, 0.7, 0.3);
  s.impostor = Normals(rng, 2000, 0.1, 0.3);
  const auto roc = eval::SweepRoc(s, 200);
  REQUIRE(roc.thresholds.size() >= 200);
  CHECK(std::is_sorted(roc.thresholds.begin(), roc.thresholds.end()));
  for (std::size_t i = 1; i < roc.far.size(); ++i) {
    CHECK(roc.far[i] <= roc.far[i - 1]);
    CHECK(roc.frr[i] >= roc.frr[i - 1]);
  }
  CHECK(roc.far.front() == 1.0);
  CHECK(roc.frr.front() == 0.0);

  eval::ScoreSet shuffled = s;
  std::shuffle(shuffled.genuine.begin(), shuffled.genuine.end(), rng.engine());
  std::shuffle(shuffled.impostor.begin(), shuffled.impostor.end(), rng.engine());
  const auto r2 = eval::SweepRoc(shuffled, 200);
  CHECK(r2.eer == roc.eer);
  CHECK(r2.far == roc.far);

  eval::ScoreSet scaled = s;
  for (double& v : scaled.genuine) v *= 3.0;
  for (double& v : scaled.impostor) v *= 3.0;
  CHECK(eval::SweepRoc(scaled, 200).eer == doctest::Approx(roc.eer).epsilon(1e-9));

  const auto file = std::filesystem::temp_directory_path() / "starlk_roc.csv";
  eval::WriteRocCsv(roc, file);
  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("threshold") != std::string::npos);
  std::filesystem::remove(file);
  CHECK(eval::EerSummary(roc, s).find("eer") != std::string::npos);
}

TEST_CASE("occlusion patch counts") {
  CHECK(eval::OcclusionPatchCount(224, 16, 0.10) == 20);
  CHECK(eval::OcclusionPatchCount(224, 16, 0.0) == 0);
  CHECK(eval::OcclusionPatchCount(32, 16, 1.0) == 4);
  CHECK_THROWS(eval::OcclusionPatchCount(224, 16, 1.5));
  CHECK_THROWS(eval::OcclusionPatchCount(8, 16, 0.1));
}

TEST_CASE("occluded patches are zero squares") {
  std::vector<double> img(2 * 64 * 64, 1.0);
  Rng rng(4);
  eval::OccludeImage(img, 2, 64, 16, 4, rng);
  const auto zeros = std::count(img.begin(), img.end(), 0.0);
  CHECK(zeros == 2 * 4 * 256);
  for (int i = 0; i < 64 * 64; ++i) CHECK(img[i] == img[64 * 64 + i]);
  Rng again(4);
  std::vector<double> img2(2 * 64 * 64, 1.0);
  eval::OccludeImage(img2, 2, 64, 16, 4, again);
  CHECK(img2 == img);
}

TEST_CASE("occlusion sweep protocol") {
  laknet::Model model(laknet::LaKNetConfig::Toy(10), 3);
  const auto images = RandomImages(40, 32, 8);
  std::vector<int> labels(40);
  Rng rng(9);
  for (int& l : labels) l = static_cast<int>(rng.UniformInt(10));
  model.SetMode(nn::Mode::kEval);
  const double plain = eval::Accuracy(model, images, labels);
  eval::OcclusionOptions opts;
  opts.ratios = {0.0, 0.5, 1.0};
  opts.seed = 2;
  const auto a = eval::OcclusionSweep(model, images, labels, opts);
  const auto b = eval::OcclusionSweep(model, images, labels, opts);
  CHECK(a.accuracy[0] == plain);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.patch_counts == std::vector<int>{0, 2, 4});
  CHECK(a.ToCsv().rfind("ratio,accuracy\n", 0) == 0);
}

TEST_CASE("embedding is the pooled pre-classifier feature") {
  laknet::Model model(laknet::LaKNetConfig::Toy(10), 1);
  const auto images = RandomImages(3, 32, 2);
  const auto emb = eval::Embed(model, images, 2);
  model.SetMode(nn::Mode::kEval);
  nn::NoGradGuard guard;
  const auto direct = model.Run(images).features;
  REQUIRE(emb.shape() == direct.shape());
  for (std::size_t i = 0; i < emb.data().size(); ++i) CHECK(emb.data()[i] == direct.data()[i]);
}

TEST_CASE("activation map against a finite-difference oracle") {
  const auto cfg = laknet::LaKNetConfig::Toy(4);
  laknet::Model model(cfg, 6);
  const auto image = RandomImages(1, 32, 12);
  const int stage = eval::DefaultCamStage(cfg);
  CHECK(stage == 2);
  // Use the first class with a positive response so the comparison is not
  // trivially zero.
  int cls = 0;
  Plane map = eval::ActivationMap(model, image, cls);
  while (*std::max_element(map.values.begin(), map.values.end()) == 0.0 && cls + 1 < cfg.num_classes) {
    map = eval::ActivationMap(model, image, ++cls);
  }

  model.SetMode(nn::Mode::kEval);
  nn::NoGradGuard guard;
  std::vector<double> act;
  nn::Shape shape;
  auto logit_with = [&](std::int64_t index, double delta) {
    laknet::ForwardOptions opts;
    opts.stage_hook = [&](int s, const nn::Tensor& out) {
      if (s != stage) return out;
      act.assign(out.data().begin(), out.data().end());
      shape = out.shape();
      std::vector<double> v = act;
      if (index >= 0) v[index] += delta;
      return nn::Tensor::FromData(out.shape(), v);
    };
    return model.Run(image, opts).logits.data()[cls];
  };
  logit_with(-1, 0.0);
  const std::int64_t c = shape[1], hw = shape[2] * shape[3];
  Plane cam(shape[2], shape[3]);
  const double h = 1e-5;
  for (std::int64_t k = 0; k < c; ++k) {
    double w = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) {
      w += (logit_with(k * hw + i, h) - logit_with(k * hw + i, -h)) / (2 * h);
    }
    logit_with(-1, 0.0);
    w /= static_cast<double>(hw);
    for (std::int64_t i = 0; i < hw; ++i) cam.values[i] += w * act[k * hw + i];
  }
  for (double& v : cam.values) v = std::max(v, 0.0);
  const double lo = *std::min_element(cam.values.begin(), cam.values.end());
  std::vector<double> expect(32 * 32);
  for (int r = 0; r < 32; ++r)
    for (int q = 0; q < 32; ++q)
      expect[r * 32 + q] = oracle::BilinearAt(cam, (r + 0.5) * shape[2] / 32.0 - 0.5, (q + 0.5) * shape[3] / 32.0 - 0.5) - lo;
  const double hi = *std::max_element(expect.begin(), expect.end());
  REQUIRE(hi > 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i) worst = std::max(worst, std::abs(map.values[i] - expect[i] / hi));
  MESSAGE("CAM max deviation " << worst);
  CHECK(worst < 1e-6);
  CHECK(*std::max_element(map.values.begin(), map.values.end()) == 1.0);
  CHECK(*std::min_element(map.values.begin(), map.values.end()) >= 0.0);
  CHECK_THROWS(eval::ActivationMap(model, image, 4));
  CHECK_THROWS(eval::ActivationMap(model, image, 0, 3));
}

TEST_CASE("zero map stays zero after normalization") {
  Plane p(4, 4);
  eval::NormalizeMinMax(p);
  for (double v : p.values) CHECK(v == 0.0);
}
