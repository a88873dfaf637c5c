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

#include "starlk/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "starlk/image.hpp"
#include "starlk/kv.hpp"

namespace starlk::data {
namespace fs = std::filesystem;

std::string ToString(Split split) { return split == Split::kTrain ? "train" : "test"; }

namespace {

Split ParseSplit(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + s + "'");
}

bool IsImageFile(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm" || ext == ".ppm" ||
         ext == ".pnm";
}

std::vector<fs::path> SortedChildren(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && IsImageFile(e.path()))) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<std::size_t> DatasetManifest::Indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == split) out.push_back(i);
  }
  return out;
}

void DatasetManifest::ValidateStructure() const {
  if (classes.empty()) throw std::invalid_argument("dataset '" + root.string() + "' has no classes");
  for (const auto& e : entries) {
    if (e.class_index < 0 || e.class_index >= static_cast<int>(classes.size())) {
      throw std::invalid_argument("manifest entry '" + e.path + "' has class index " +
                                  std::to_string(e.class_index) + " outside 0.." +
                                  std::to_string(classes.size() - 1));
    }
  }
  if (image_side <= 0 || channels <= 0) throw std::invalid_argument("manifest side and channels must be > 0");
}

void DatasetManifest::Validate() const {
  ValidateStructure();
  std::vector<int> train(classes.size()), test(classes.size());
  for (const auto& e : entries) (e.split == Split::kTrain ? train : test)[e.class_index]++;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (train[c] == 0 || test[c] == 0) {
      throw std::invalid_argument("class '" + classes[c] + "' has " + std::to_string(train[c]) +
                                  " train and " + std::to_string(test[c]) +
                                  " test images; each split needs at least one");
    }
  }
}

DatasetManifest ScanDataset(const fs::path& root, const SplitRule& rule, int image_side) {
  if (!fs::is_directory(root)) {
    throw std::invalid_argument("dataset root '" + root.string() + "' is not a directory");
  }
  DatasetManifest m;
  m.root = root;
  m.image_side = image_side;

  // Per class: (session tag, files). Loose files in a class directory form
  // one untagged session.
  std::vector<std::vector<std::pair<std::string, std::vector<std::string>>>> sessions;
  for (const auto& class_dir : SortedChildren(root, true)) {
    const std::string name = class_dir.filename().string();
    std::vector<std::pair<std::string, std::vector<std::string>>> per_class;
    std::vector<std::string> loose;
    for (const auto& f : SortedChildren(class_dir, false)) loose.push_back(name + "/" + f.filename().string());
    if (!loose.empty()) per_class.emplace_back("", std::move(loose));
    for (const auto& session_dir : SortedChildren(class_dir, true)) {
      const std::string tag = session_dir.filename().string();
      std::vector<std::string> files;
      for (const auto& f : SortedChildren(session_dir, false)) {
        files.push_back(name + "/" + tag + "/" + f.filename().string());
      }
      if (!files.empty()) per_class.emplace_back(tag, std::move(files));
    }
    if (per_class.empty()) {
      throw std::invalid_argument("class directory '" + class_dir.string() + "' contains no images");
    }
    m.classes.push_back(name);
    sessions.push_back(std::move(per_class));
  }
  if (m.classes.empty()) throw std::invalid_argument("dataset root '" + root.string() + "' has no class directories");

  const bool by_session = std::all_of(sessions.begin(), sessions.end(), [](const auto& s) {
    return s.size() >= 2 && std::none_of(s.begin(), s.end(), [](const auto& p) { return p.first.empty(); });
  });
  const Rng base(rule.seed);
  for (std::size_t c = 0; c < sessions.size(); ++c) {
    if (by_session) {
      for (std::size_t s = 0; s < sessions[c].size(); ++s) {
        for (const auto& path : sessions[c][s].second) {
          m.entries.push_back({path, static_cast<int>(c), sessions[c][s].first,
                               s == 0 ? Split::kTrain : Split::kTest});
        }
      }
      continue;
    }
    std::vector<ManifestEntry> all;
    for (const auto& [tag, files] : sessions[c]) {
      for (const auto& path : files) all.push_back({path, static_cast<int>(c), tag, Split::kTest});
    }
    Rng rng = base.Derive(c);
    const auto perm = rng.Permutation(static_cast<std::int64_t>(all.size()));
    const std::size_t n_train = (all.size() + 1) / 2;
    for (std::size_t k = 0; k < n_train; ++k) all[perm[k]].split = Split::kTrain;
    for (auto& e : all) m.entries.push_back(std::move(e));
  }
  m.Validate();
  return m;
}

void WriteManifest(const DatasetManifest& manifest, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  // Relative roots, and a root that is the manifest's own directory, are
  // stored relative to that directory so the file does not depend on the
  // reader's working directory.
  fs::path root = manifest.root;
  const fs::path here = fs::absolute(file).parent_path().lexically_normal();
  const fs::path target = fs::absolute(root).lexically_normal();
  if (root.is_relative() || target == here || target == here / "") {
    root = target.lexically_relative(here);
    if (root.empty()) root = ".";
  }
  out << "root=" << root.string() << "\n"
      << "side=" << manifest.image_side << "\n"
      << "channels=" << manifest.channels << "\n"
      << "classes=";
  for (std::size_t i = 0; i < manifest.classes.size(); ++i) out << (i ? "," : "") << manifest.classes[i];
  out << "\n";
  for (const auto& e : manifest.entries) {
    out << e.path << "," << e.class_index << "," << e.session << "," << ToString(e.split) << "\n";
  }
}

DatasetManifest ReadManifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open manifest '" + file.string() + "'");
  DatasetManifest m;
  std::string line;
  int n = 0;
  auto fail = [&](const std::string& why) -> void {
    throw std::invalid_argument(file.string() + ":" + std::to_string(n) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    if (n <= 4) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected header key=value");
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      auto to_int = [&](const std::string& v) {
        kv::Entry probe{"", key, v, n};
        try {
          return kv::ToInt(probe);
        } catch (const std::invalid_argument&) {
          fail("bad value for '" + key + "'");
        }
        return 0;
      };
      if (key == "root") m.root = value;
      else if (key == "side") m.image_side = to_int(value);
      else if (key == "channels") m.channels = to_int(value);
      else if (key == "classes") m.classes = kv::Split(value, ',');
      else fail("unknown header key '" + key + "'");
      continue;
    }
    const auto parts = kv::Split(line, ',');
    if (parts.size() != 4) fail("expected path,class,session,split");
    ManifestEntry e;
    e.path = parts[0];
    try {
      e.class_index = kv::ToInt(kv::Entry{"", "class", parts[1], n});
      e.split = ParseSplit(parts[3]);
    } catch (const std::invalid_argument&) {
      fail("bad entry '" + line + "'");
    }
    e.session = parts[2];
    m.entries.push_back(std::move(e));
  }
  if (m.root.is_relative()) m.root = file.parent_path() / m.root;
  m.ValidateStructure();
  for (const auto& e : m.entries) {
    if (!fs::exists(m.root / e.path)) {
      throw std::invalid_argument("manifest entry '" + e.path + "' does not exist under '" +
                                  m.root.string() + "'");
    }
  }
  return m;
}

nn::Tensor LoadImage(const fs::path& path, int side) {
  if (side <= 0) throw std::invalid_argument("image side must be > 0");
  const Plane gray = ToGrayPlane(ReadImage(path));
  Plane resized = (gray.rows == side && gray.cols == side) ? gray : ResizeBilinear(gray, side, side);
  for (double& v : resized.values) v = std::clamp(v, 0.0, 1.0);
  nn::RoundToPrecision(resized.values);
  return nn::Tensor::FromData({1, side, side}, std::move(resized.values));
}

nn::Tensor ImageSet::Stack(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(images.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    indices = all;
  }
  std::vector<double> out;
  out.reserve(indices.size() * image_size());
  for (std::size_t i : indices) out.insert(out.end(), images.at(i).begin(), images.at(i).end());
  return nn::Tensor::FromData({static_cast<std::int64_t>(indices.size()), channels, side, side}, std::move(out));
}

ImageSet LoadSplit(const DatasetManifest& manifest, Split split) {
  ImageSet set;
  set.side = manifest.image_side;
  set.channels = 1;
  for (std::size_t i : manifest.Indices(split)) {
    const auto& e = manifest.entries[i];
    const nn::Tensor img = LoadImage(manifest.root / e.path, manifest.image_side);
    set.images.emplace_back(img.data().begin(), img.data().end());
    set.labels.push_back(e.class_index);
    set.paths.push_back(e.path);
  }
  return set;
}

void AugmentPolicy::Validate() const {
  if (pad < 0) throw std::invalid_argument("augment pad must be >= 0");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw std::invalid_argument("flip probability must lie in [0,1]");
}

AugmentDecision DrawAugment(const AugmentPolicy& policy, Rng& rng) {
  policy.Validate();
  AugmentDecision d;
  d.crop_y = policy.pad;
  d.crop_x = policy.pad;
  if (policy.flip) d.flip = rng.Bernoulli(policy.flip_prob);
  if (policy.crop) {
    d.crop_y = static_cast<int>(rng.UniformInt(2 * policy.pad + 1));
    d.crop_x = static_cast<int>(rng.UniformInt(2 * policy.pad + 1));
  }
  return d;
}

void ApplyAugment(std::span<double> image, int channels, int height, int width, int pad,
                  const AugmentDecision& d) {
  if (image.size() != static_cast<std::size_t>(channels) * height * width) {
    throw std::invalid_argument("augment: image buffer does not match its shape");
  }
  if (d.crop_y < 0 || d.crop_y > 2 * pad || d.crop_x < 0 || d.crop_x > 2 * pad) {
    throw std::invalid_argument("augment: crop offset outside the padded image");
  }
  std::vector<double> src(image.begin(), image.end());
  const int dy = d.crop_y - pad, dx = d.crop_x - pad;
  for (int c = 0; c < channels; ++c) {
    const double* plane = src.data() + static_cast<std::size_t>(c) * height * width;
    double* out = image.data() + static_cast<std::size_t>(c) * height * width;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        // Crop from the padded (and possibly flipped) image.
        const int sy = y + dy;
        int sx = x + dx;
        double v = 0.0;
        if (sy >= 0 && sy < height && sx >= 0 && sx < width) {
          if (d.flip) sx = width - 1 - sx;
          v = plane[sy * width + sx];
        }
        out[y * width + x] = v;
      }
    }
  }
}

nn::Tensor Augment(const nn::Tensor& image, const AugmentPolicy& policy, Rng& rng) {
  const auto& s = image.shape();
  if (!(s.size() == 3 || (s.size() == 4 && s[0] == 1))) {
    throw std::invalid_argument("augment expects [C,H,W] or [1,C,H,W], got " + nn::ShapeString(s));
  }
  const auto r = s.size();
  std::vector<double> v(image.data().begin(), image.data().end());
  ApplyAugment(v, static_cast<int>(s[r - 3]), static_cast<int>(s[r - 2]), static_cast<int>(s[r - 1]),
               policy.pad, DrawAugment(policy, rng));
  return nn::Tensor::FromData(s, std::move(v));
}

std::vector<std::vector<std::size_t>> EpochBatches(std::size_t count, int batch_size, std::uint64_t seed,
                                                   int epoch) {
  if (batch_size <= 0) throw std::invalid_argument("batch size must be > 0");
  Rng rng = Rng(seed).Derive(static_cast<std::uint64_t>(epoch));
  const auto perm = rng.Permutation(static_cast<std::int64_t>(count));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < count; i += batch_size) {
    const std::size_t end = std::min(count, i + batch_size);
    std::vector<std::size_t> b;
    for (std::size_t k = i; k < end; ++k) b.push_back(static_cast<std::size_t>(perm[k]));
    if (b.size() == 1 && !batches.empty()) {
      batches.back().push_back(b.front());
    } else {
      batches.push_back(std::move(b));
    }
  }
  return batches;
}

Batch AssembleBatch(const ImageSet& set, std::span<const std::size_t> indices, const AugmentPolicy& policy,
                    Rng& rng) {
  Batch batch;
  const std::size_t n = set.image_size();
  std::vector<double> out(indices.size() * n);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& img = set.images.at(indices[b]);
    std::copy(img.begin(), img.end(), out.begin() + b * n);
    if (policy.flip || policy.crop) {
      ApplyAugment(std::span<double>(out).subspan(b * n, n), set.channels, set.side, set.side, policy.pad,
                   DrawAugment(policy, rng));
    }
    batch.labels.push_back(set.labels.at(indices[b]));
  }
  batch.images = nn::Tensor::FromData({static_cast<std::int64_t>(indices.size()), set.channels, set.side, set.side},
                                      std::move(out));
  return batch;
}

nn::Tensor OneHot(std::span<const int> labels, int num_classes) {
  std::vector<double> v(labels.size() * num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " outside 0.." +
                                  std::to_string(num_classes - 1));
    }
    v[i * num_classes + labels[i]] = 1.0;
  }
  return nn::Tensor::FromData({static_cast<std::int64_t>(labels.size()), num_classes}, std::move(v));
}

}  // namespace starlk::data
