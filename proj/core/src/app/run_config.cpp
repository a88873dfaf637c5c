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

#include "starlk/app/run_config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <stdexcept>

#include "starlk/kv.hpp"

namespace starlk::app {
namespace {

[[noreturn]] void BadEntry(const kv::Entry& e, const std::string& what) {
  throw std::invalid_argument("line " + std::to_string(e.line) + ": [" + e.section + "] " + e.key + ": " + what);
}

std::uint64_t ToU64(const kv::Entry& e) {
  std::uint64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) BadEntry(e, "expected an unsigned integer, got '" + e.value + "'");
  return v;
}

std::vector<double> ToDoubleList(const kv::Entry& e) {
  std::vector<double> out;
  if (e.value.empty()) return out;
  for (const auto& part : kv::Split(e.value, ',')) {
    kv::Entry item = e;
    item.value = part;
    out.push_back(kv::ToDouble(item));
  }
  return out;
}

std::string JoinDoubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + kv::FormatDouble(v[i]);
  return out;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

void CheckText(const char* key, const std::string& value) {
  if (value.find_first_of("#\n\r") != std::string::npos || kv::Trim(value) != value) {
    throw std::invalid_argument(std::string(key) + " must not contain '#', line breaks or edge whitespace");
  }
}

}  // namespace

std::string ToString(Augmentation a) {
  switch (a) {
    case Augmentation::kNone: return "none";
    case Augmentation::kMixup: return "mixup";
    case Augmentation::kStarmix: return "starmix";
  }
  return "none";
}

Augmentation ParseAugmentation(const std::string& text) {
  if (text == "none") return Augmentation::kNone;
  if (text == "mixup") return Augmentation::kMixup;
  if (text == "starmix") return Augmentation::kStarmix;
  throw std::invalid_argument("augmentation must be none|mixup|starmix, got '" + text + "'");
}

std::string ToString(Scheduler s) { return s == Scheduler::kCosine ? "cosine" : "constant"; }

Scheduler ParseScheduler(const std::string& text) {
  if (text == "cosine") return Scheduler::kCosine;
  if (text == "constant") return Scheduler::kConstant;
  throw std::invalid_argument("scheduler must be cosine|constant, got '" + text + "'");
}

std::string ToString(nn::Precision p) { return p == nn::Precision::kTest ? "test" : "train"; }

nn::Precision ParsePrecision(const std::string& text) {
  if (text == "test") return nn::Precision::kTest;
  if (text == "train") return nn::Precision::kTrain;
  throw std::invalid_argument("precision must be test|train, got '" + text + "'");
}

void RunConfig::Validate() const {
  CheckText("data.root", data_root);
  CheckText("model.file", model_file);
  CheckText("run.out", out_dir);
  if (data_root.empty()) synthetic.Validate();
  if (model_preset != "toy" && model_preset != "full") {
    throw std::invalid_argument("model.preset must be toy|full, got '" + model_preset + "'");
  }
  if (num_classes < 0) throw std::invalid_argument("model.num_classes must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("optim.lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("optim.momentum must lie in [0,1)");
  if (weight_decay < 0.0) throw std::invalid_argument("optim.weight_decay must be >= 0");
  if (epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("train.batch_size must be >= 2");
  if (eval_batch < 1) throw std::invalid_argument("train.eval_batch must be >= 1");
  MixParams().Validate();
  augment.Validate();
  if (impostor_ratio < 0.0) throw std::invalid_argument("eval.impostor_ratio must be >= 0");
  if (max_genuine < 0) throw std::invalid_argument("eval.max_genuine must be >= 0");
  if (num_thresholds < 2) throw std::invalid_argument("eval.num_thresholds must be >= 2");
  for (double r : occlusion_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("eval.occlusion_ratios entries must lie in [0,1]");
  }
  if (patch_side < 1) throw std::invalid_argument("eval.patch_side must be >= 1");
  if (cam_stage < -1 || cam_stage > 3) throw std::invalid_argument("eval.cam_stage must be -1..3");
  if (out_dir.empty()) throw std::invalid_argument("run.out must not be empty");
}

mix::MixParams RunConfig::MixParams() const {
  mix::MixParams p;
  p.alpha = mix_alpha;
  p.threshold_lo = threshold_lo;
  p.threshold_hi = threshold_hi;
  // Plain mixup never takes the star path.
  if (augmentation == Augmentation::kMixup) p.threshold_lo = p.threshold_hi = 2.0;
  p.rng_seed = seed;
  return p;
}

nn::OptimizerConfig RunConfig::OptimizerConfig() const {
  nn::OptimizerConfig c;
  c.kind = optimizer;
  c.base_lr = lr;
  c.momentum = momentum;
  c.weight_decay = weight_decay;
  return c;
}

std::string RunConfig::Emit() const {
  const auto& s = synthetic;
  const auto d = kv::FormatDouble;
  std::string o;
  o += "[data]\n";
  o += "root = " + data_root + "\n";
  o += "split_seed = " + std::to_string(split_seed) + "\n";
  o += "synthetic_classes = " + std::to_string(s.num_classes) + "\n";
  o += "synthetic_images = " + std::to_string(s.images_per_class) + "\n";
  o += "synthetic_side = " + std::to_string(s.side) + "\n";
  o += "synthetic_min_veins = " + std::to_string(s.min_veins) + "\n";
  o += "synthetic_max_veins = " + std::to_string(s.max_veins) + "\n";
  o += "synthetic_min_thickness = " + d(s.min_thickness) + "\n";
  o += "synthetic_max_thickness = " + d(s.max_thickness) + "\n";
  o += "synthetic_contrast = " + d(s.contrast) + "\n";
  o += "synthetic_contrast_jitter = " + d(s.contrast_jitter) + "\n";
  o += "synthetic_noise = " + d(s.noise) + "\n";
  o += "synthetic_max_shift = " + d(s.max_shift) + "\n";
  o += "synthetic_seed = " + std::to_string(s.seed) + "\n";
  o += "\n[model]\n";
  o += "preset = " + model_preset + "\n";
  o += "file = " + model_file + "\n";
  o += "num_classes = " + std::to_string(num_classes) + "\n";
  o += "\n[optim]\n";
  o += "optimizer = " + nn::ToString(optimizer) + "\n";
  o += "lr = " + d(lr) + "\n";
  o += "momentum = " + d(momentum) + "\n";
  o += "weight_decay = " + d(weight_decay) + "\n";
  o += "scheduler = " + ToString(scheduler) + "\n";
  o += "\n[train]\n";
  o += "epochs = " + std::to_string(epochs) + "\n";
  o += "batch_size = " + std::to_string(batch_size) + "\n";
  o += "eval_batch = " + std::to_string(eval_batch) + "\n";
  o += "augmentation = " + ToString(augmentation) + "\n";
  o += "seed = " + std::to_string(seed) + "\n";
  o += "precision = " + ToString(precision) + "\n";
  o += "\n[mix]\n";
  o += "alpha = " + d(mix_alpha) + "\n";
  o += "threshold_lo = " + d(threshold_lo) + "\n";
  o += "threshold_hi = " + d(threshold_hi) + "\n";
  o += "\n[augment]\n";
  o += "flip = " + Bool(augment.flip) + "\n";
  o += "flip_prob = " + d(augment.flip_prob) + "\n";
  o += "crop = " + Bool(augment.crop) + "\n";
  o += "pad = " + std::to_string(augment.pad) + "\n";
  o += "\n[eval]\n";
  o += "impostor_ratio = " + d(impostor_ratio) + "\n";
  o += "max_genuine = " + std::to_string(max_genuine) + "\n";
  o += "num_thresholds = " + std::to_string(num_thresholds) + "\n";
  o += "occlusion_ratios = " + JoinDoubles(occlusion_ratios) + "\n";
  o += "patch_side = " + std::to_string(patch_side) + "\n";
  o += "cam_stage = " + std::to_string(cam_stage) + "\n";
  o += "\n[run]\n";
  o += "out = " + out_dir + "\n";
  return o;
}

RunConfig RunConfig::Parse(const std::string& text) {
  RunConfig c;
  using Setter = std::function<void(const kv::Entry&)>;
  auto& s = c.synthetic;
  const std::map<std::string, Setter> setters = {
      {"data.root", [&](const kv::Entry& e) { c.data_root = e.value; }},
      {"data.split_seed", [&](const kv::Entry& e) { c.split_seed = ToU64(e); }},
      {"data.synthetic_classes", [&](const kv::Entry& e) { s.num_classes = kv::ToInt(e); }},
      {"data.synthetic_images", [&](const kv::Entry& e) { s.images_per_class = kv::ToInt(e); }},
      {"data.synthetic_side", [&](const kv::Entry& e) { s.side = kv::ToInt(e); }},
      {"data.synthetic_min_veins", [&](const kv::Entry& e) { s.min_veins = kv::ToInt(e); }},
      {"data.synthetic_max_veins", [&](const kv::Entry& e) { s.max_veins = kv::ToInt(e); }},
      {"data.synthetic_min_thickness", [&](const kv::Entry& e) { s.min_thickness = kv::ToDouble(e); }},
      {"data.synthetic_max_thickness", [&](const kv::Entry& e) { s.max_thickness = kv::ToDouble(e); }},
      {"data.synthetic_contrast", [&](const kv::Entry& e) { s.contrast = kv::ToDouble(e); }},
      {"data.synthetic_contrast_jitter", [&](const kv::Entry& e) { s.contrast_jitter = kv::ToDouble(e); }},
      {"data.synthetic_noise", [&](const kv::Entry& e) { s.noise = kv::ToDouble(e); }},
      {"data.synthetic_max_shift", [&](const kv::Entry& e) { s.max_shift = kv::ToDouble(e); }},
      {"data.synthetic_seed", [&](const kv::Entry& e) { s.seed = ToU64(e); }},
      {"model.preset", [&](const kv::Entry& e) { c.model_preset = e.value; }},
      {"model.file", [&](const kv::Entry& e) { c.model_file = e.value; }},
      {"model.num_classes", [&](const kv::Entry& e) { c.num_classes = kv::ToInt(e); }},
      {"optim.optimizer", [&](const kv::Entry& e) { c.optimizer = nn::ParseOptimizerKind(e.value); }},
      {"optim.lr", [&](const kv::Entry& e) { c.lr = kv::ToDouble(e); }},
      {"optim.momentum", [&](const kv::Entry& e) { c.momentum = kv::ToDouble(e); }},
      {"optim.weight_decay", [&](const kv::Entry& e) { c.weight_decay = kv::ToDouble(e); }},
      {"optim.scheduler", [&](const kv::Entry& e) { c.scheduler = ParseScheduler(e.value); }},
      {"train.epochs", [&](const kv::Entry& e) { c.epochs = kv::ToInt(e); }},
      {"train.batch_size", [&](const kv::Entry& e) { c.batch_size = kv::ToInt(e); }},
      {"train.eval_batch", [&](const kv::Entry& e) { c.eval_batch = kv::ToInt(e); }},
      {"train.augmentation", [&](const kv::Entry& e) { c.augmentation = ParseAugmentation(e.value); }},
      {"train.seed", [&](const kv::Entry& e) { c.seed = ToU64(e); }},
      {"train.precision", [&](const kv::Entry& e) { c.precision = ParsePrecision(e.value); }},
      {"mix.alpha", [&](const kv::Entry& e) { c.mix_alpha = kv::ToDouble(e); }},
      {"mix.threshold_lo", [&](const kv::Entry& e) { c.threshold_lo = kv::ToDouble(e); }},
      {"mix.threshold_hi", [&](const kv::Entry& e) { c.threshold_hi = kv::ToDouble(e); }},
      {"augment.flip", [&](const kv::Entry& e) { c.augment.flip = kv::ToBool(e); }},
      {"augment.flip_prob", [&](const kv::Entry& e) { c.augment.flip_prob = kv::ToDouble(e); }},
      {"augment.crop", [&](const kv::Entry& e) { c.augment.crop = kv::ToBool(e); }},
      {"augment.pad", [&](const kv::Entry& e) { c.augment.pad = kv::ToInt(e); }},
      {"eval.impostor_ratio", [&](const kv::Entry& e) { c.impostor_ratio = kv::ToDouble(e); }},
      {"eval.max_genuine", [&](const kv::Entry& e) { c.max_genuine = static_cast<std::int64_t>(ToU64(e)); }},
      {"eval.num_thresholds", [&](const kv::Entry& e) { c.num_thresholds = kv::ToInt(e); }},
      {"eval.occlusion_ratios", [&](const kv::Entry& e) { c.occlusion_ratios = ToDoubleList(e); }},
      {"eval.patch_side", [&](const kv::Entry& e) { c.patch_side = kv::ToInt(e); }},
      {"eval.cam_stage", [&](const kv::Entry& e) { c.cam_stage = kv::ToInt(e); }},
      {"run.out", [&](const kv::Entry& e) { c.out_dir = e.value; }},
  };
  for (const auto& e : kv::Parse(text)) {
    const auto it = setters.find(e.section + "." + e.key);
    if (it == setters.end()) BadEntry(e, "unknown key");
    try {
      it->second(e);
    } catch (const std::invalid_argument& err) {
      const std::string what = err.what();
      if (what.rfind("line ", 0) == 0) throw;
      BadEntry(e, what);
    }
  }
  c.Validate();
  return c;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  try {
    return Parse(kv::ReadFile(path.string()));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace starlk::app
