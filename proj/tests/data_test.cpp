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
#include <iterator>
#include <numeric>
#include <set>
#include <string>

#include "doctest.h"
#include "starlk/data/dataset.hpp"
#include "starlk/data/synthetic.hpp"
#include "support/oracles.hpp"

using namespace starlk;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void WriteGray(const fs::path& file, int w, int h, const std::vector<std::uint8_t>& px) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

std::string Slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double Correlation(const Plane& a, const Plane& b) {
  const double n = static_cast<double>(a.values.size());
  const double ma = std::accumulate(a.values.begin(), a.values.end(), 0.0) / n;
  const double mb = std::accumulate(b.values.begin(), b.values.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    sab += (a.values[i] - ma) * (b.values[i] - mb);
    saa += (a.values[i] - ma) * (a.values[i] - ma);
    sbb += (b.values[i] - mb) * (b.values[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("session split of a generated tree") {
  TempDir dir("starlk_data_sessions");
  data::SyntheticVeinSpec spec;
  spec.images_per_class = 20;
  data::GenerateSynthetic(spec, dir.path);
  const auto m = data::ScanDataset(dir.path, {}, 32);
  CHECK(m.classes.size() == 10);
  CHECK(m.Count(data::Split::kTrain) == 100);
  CHECK(m.Count(data::Split::kTest) == 100);
  for (const auto& e : m.entries) CHECK((e.split == data::Split::kTrain) == (e.session == "session_1"));
  const auto train = m.Indices(data::Split::kTrain);
  const auto test = m.Indices(data::Split::kTest);
  std::set<std::size_t> all(train.begin(), train.end());
  for (auto i : test) CHECK(all.insert(i).second);
  CHECK(all.size() == m.entries.size());
  CHECK(std::is_sorted(m.entries.begin(), m.entries.end(),
                       [](const auto& a, const auto& b) { return a.path < b.path; }));
}

TEST_CASE("single-session tree falls back to a stratified split") {
  TempDir dir("starlk_data_single");
  const std::vector<std::uint8_t> px(16, 128);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 6 + (c == 2); ++i)
      WriteGray(dir.path / ("c" + std::to_string(c)) / "s1" / ("i" + std::to_string(i) + ".pgm"), 4, 4, px);
  const auto a = data::ScanDataset(dir.path, {5}, 8);
  for (int c = 0; c < 3; ++c) {
    int train = 0, test = 0;
    for (const auto& e : a.entries)
      if (e.class_index == c) (e.split == data::Split::kTrain ? train : test)++;
    CHECK(train == (c == 2 ? 4 : 3));
    CHECK(test == 3);
  }
  const auto b = data::ScanDataset(dir.path, {5}, 8);
  CHECK(a.entries == b.entries);
  const auto other = data::ScanDataset(dir.path, {6}, 8);
  CHECK_FALSE(other.entries == a.entries);
}

TEST_CASE("scan errors name the offending path") {
  TempDir dir("starlk_data_errors");
  CHECK_THROWS_WITH_AS(data::ScanDataset(dir.path / "absent", {}, 8), doctest::Contains("absent"), std::exception);
  fs::create_directories(dir.path / "empty_class" / "s1");
  CHECK_THROWS_WITH_AS(data::ScanDataset(dir.path, {}, 8), doctest::Contains("empty_class"), std::exception);
}

TEST_CASE("manifest round trip") {
  TempDir dir("starlk_data_manifest");
  data::SyntheticVeinSpec spec;
  spec.num_classes = 3;
  spec.images_per_class = 4;
  const auto m = data::GenerateSynthetic(spec, dir.path);
  const auto back = data::ReadManifest(dir.path / "manifest.txt");
  CHECK(back.entries == m.entries);
  CHECK(back.classes == m.classes);
  CHECK(fs::equivalent(back.root, dir.path));
  fs::remove(dir.path / m.entries[1].path);
  CHECK_THROWS_WITH_AS(data::ReadManifest(dir.path / "manifest.txt"), doctest::Contains(m.entries[1].path.c_str()),
                       std::exception);
}

TEST_CASE("manifest with a relative root is readable from another directory") {
  TempDir dir("starlk_data_relroot");
  const fs::path cwd = fs::current_path();
  fs::current_path(dir.path);
  data::SyntheticVeinSpec spec;
  spec.num_classes = 2;
  spec.images_per_class = 2;
  data::GenerateSynthetic(spec, "run/dataset");
  const auto m = data::ScanDataset("run/dataset", {}, 32);
  data::WriteManifest(m, "run/manifest.txt");
  fs::current_path(cwd);
  const auto back = data::ReadManifest(dir.path / "run" / "manifest.txt");
  CHECK(fs::equivalent(back.root, dir.path / "run" / "dataset"));
  CHECK(back.entries == m.entries);
}

TEST_CASE("load image") {
  TempDir dir("starlk_data_load");
  WriteGray(dir.path / "black.pgm", 5, 3, std::vector<std::uint8_t>(15, 0));
  WriteGray(dir.path / "white.pgm", 5, 3, std::vector<std::uint8_t>(15, 255));
  const auto black = data::LoadImage(dir.path / "black.pgm", 8);
  const auto white = data::LoadImage(dir.path / "white.pgm", 8);
  for (double v : black.data()) CHECK(v == 0.0);
  for (double v : white.data()) CHECK(v == 1.0);

  std::vector<std::uint8_t> board(64);
  Plane src(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      board[r * 8 + c] = ((r + c) % 2) ? 255 : 0;
      src.at(r, c) = (r + c) % 2;
    }
  WriteGray(dir.path / "board.pgm", 8, 8, board);
  const auto up = data::LoadImage(dir.path / "board.pgm", 16);
  REQUIRE(up.shape() == nn::Shape{1, 16, 16});
  double worst = 0.0;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      const double expect = oracle::BilinearAt(src, (r + 0.5) * 0.5 - 0.5, (c + 0.5) * 0.5 - 0.5);
      worst = std::max(worst, std::abs(up.data()[r * 16 + c] - expect));
    }
  CHECK(worst < 1e-6);

  {
    std::ofstream rgb(dir.path / "rgb.ppm", std::ios::binary);
    const unsigned char px[3] = {255, 0, 0};
    rgb << "P6\n1 1\n255\n";
    rgb.write(reinterpret_cast<const char*>(px), 3);
  }
  CHECK(data::LoadImage(dir.path / "rgb.ppm", 1).data()[0] == doctest::Approx(0.299).epsilon(1e-3));

  {
    std::ofstream bad(dir.path / "corrupt.pgm", std::ios::binary);
    bad << "P5\n10 10\n255\n" << "abc";
  }
  CHECK_THROWS_WITH_AS(data::LoadImage(dir.path / "corrupt.pgm", 8), doctest::Contains("corrupt.pgm"), std::exception);
}

TEST_CASE("augment identities") {
  Rng rng(1);
  std::vector<double> img(2 * 6 * 7);
  for (double& v : img) v = rng.Uniform();
  auto copy = img;
  data::AugmentDecision flip{true, 3, 3};
  data::ApplyAugment(copy, 2, 6, 7, 3, flip);
  CHECK(copy[0] == img[6]);
  data::ApplyAugment(copy, 2, 6, 7, 3, flip);
  CHECK(copy == img);
  data::ApplyAugment(copy, 2, 6, 7, 3, {false, 3, 3});
  CHECK(copy == img);

  data::ApplyAugment(copy, 2, 6, 7, 3, {false, 0, 6});
  // Shifted down 3 and left 3: the top rows and right columns are padding.
  CHECK(copy[0] == 0.0);
  CHECK(copy[3 * 7 + 0] == img[0 * 7 + 3]);
  CHECK(copy[5 * 7 + 3] == img[2 * 7 + 6]);
  CHECK(copy[5 * 7 + 4] == 0.0);
  CHECK_THROWS(data::ApplyAugment(copy, 2, 6, 7, 3, {false, 7, 0}));
}

TEST_CASE("augment keeps shape and range and is seeded") {
  Rng src(2);
  std::vector<double> v(3 * 10 * 10);
  for (double& x : v) x = src.Uniform();
  const nn::Tensor img = nn::Tensor::FromData({3, 10, 10}, v);
  data::AugmentPolicy p;
  Rng a(7), b(7);
  for (int i = 0; i < 20; ++i) {
    const auto x = data::Augment(img, p, a);
    const auto y = data::Augment(img, p, b);
    CHECK(x.shape() == img.shape());
    CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
    for (double e : x.data()) {
      CHECK(e >= 0.0);
      CHECK(e <= 1.0);
    }
  }
  Rng c(7);
  const auto same = data::Augment(img, data::AugmentPolicy::None(), c);
  CHECK(std::equal(same.data().begin(), same.data().end(), img.data().begin()));

  int flips = 0;
  Rng d(3);
  for (int i = 0; i < 4000; ++i) {
    const auto dec = data::DrawAugment(p, d);
    flips += dec.flip;
    CHECK(dec.crop_y >= 0);
    CHECK(dec.crop_y <= 6);
  }
  CHECK(std::abs(flips / 4000.0 - 0.5) < 0.03);
}

TEST_CASE("epoch batches") {
  const auto b = data::EpochBatches(250, 32, 11, 0);
  CHECK(b.size() == 8);
  CHECK(b.back().size() == 250 - 7 * 32);
  std::vector<std::size_t> all;
  for (const auto& x : b) all.insert(all.end(), x.begin(), x.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK(b == data::EpochBatches(250, 32, 11, 0));
  CHECK(b != data::EpochBatches(250, 32, 11, 1));
  CHECK(b != data::EpochBatches(250, 32, 12, 0));

  const auto lone = data::EpochBatches(65, 32, 1, 0);
  REQUIRE(lone.size() == 2);
  CHECK(lone[1].size() == 33);
  CHECK(data::EpochBatches(64, 32, 1, 0).size() == 2);
  CHECK_THROWS(data::EpochBatches(10, 0, 1, 0));
}

TEST_CASE("batches and labels") {
  TempDir dir("starlk_data_batch");
  data::SyntheticVeinSpec spec;
  spec.num_classes = 3;
  spec.images_per_class = 4;
  const auto m = data::GenerateSynthetic(spec, dir.path);
  const auto set = data::LoadSplit(m, data::Split::kTrain);
  CHECK(set.size() == 6);
  const std::vector<std::size_t> pick{4, 1};
  Rng rng(1);
  const auto batch = data::AssembleBatch(set, pick, data::AugmentPolicy::None(), rng);
  CHECK(batch.images.shape() == nn::Shape{2, 1, 32, 32});
  CHECK(batch.labels == std::vector<int>{set.labels[4], set.labels[1]});
  CHECK(batch.images.data()[5] == set.images[4][5]);

  const std::vector<int> labels{2, 0};
  const auto y = data::OneHot(labels, 3);
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{0, 0, 1, 1, 0, 0});
  const std::vector<int> bad{3};
  CHECK_THROWS(data::OneHot(bad, 3));
}

TEST_CASE("synthetic generator is deterministic") {
  TempDir a("starlk_syn_a"), b("starlk_syn_b");
  data::SyntheticVeinSpec spec;
  data::GenerateSynthetic(spec, a.path);
  data::GenerateSynthetic(spec, b.path);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a.path);
    CHECK(Slurp(e.path()) == Slurp(b.path / rel));
  }
  CHECK(files == 10 * 50 + 1);
}

TEST_CASE("synthetic classes are more alike within than across") {
  data::SyntheticVeinSpec spec;
  spec.images_per_class = 10;
  std::vector<std::vector<Plane>> img(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c)
    for (int i = 0; i < spec.images_per_class; ++i) img[c].push_back(data::RenderSyntheticVein(spec, c, i));
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (int c = 0; c < spec.num_classes; ++c)
    for (int d = c; d < spec.num_classes; ++d)
      for (int i = 0; i < spec.images_per_class; ++i)
        for (int j = 0; j < spec.images_per_class; ++j) {
          if (c == d && j <= i) continue;
          const double r = Correlation(img[c][i], img[d][j]);
          (c == d ? intra : inter) += r;
          (c == d ? ni : nx)++;
        }
  intra /= ni;
  inter /= nx;
  MESSAGE("mean correlation intra " << intra << " inter " << inter);
  CHECK(intra > inter);
  for (double v : img[0][0].values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("one-image synthetic set") {
  TempDir dir("starlk_syn_one");
  data::SyntheticVeinSpec spec;
  spec.num_classes = 1;
  spec.images_per_class = 1;
  const auto m = data::GenerateSynthetic(spec, dir.path);
  CHECK(m.entries.size() == 1);
  const auto back = data::ReadManifest(dir.path / "manifest.txt");
  CHECK(back.entries.size() == 1);
  spec.max_veins = 0;
  CHECK_THROWS(data::GenerateSynthetic(spec, dir.path));
}
