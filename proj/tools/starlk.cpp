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

// starlk: train and evaluate LaKNet models, preview StarMix masks and
// generate synthetic vein data.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "starlk/app/commands.hpp"
#include "starlk/app/run_config.hpp"

namespace fs = std::filesystem;
using starlk::app::RunConfig;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string precision;
};

RunConfig Resolve(const GlobalFlags& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : RunConfig::Load(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out_dir = g.out;
  if (!g.precision.empty()) c.precision = starlk::app::ParsePrecision(g.precision);
  c.Validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StarMix augmentation and LaKNet training for vein recognition"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "run config file (key = value with [sections])");
  app.add_option("--seed", g.seed, "override train.seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--precision", g.precision, "test (64-bit) or train (32-bit)")
      ->check(CLI::IsMember({"test", "train"}));

  auto* train = app.add_subcommand("train", "train a model and write history.csv, run.json and checkpoints");
  std::optional<int> epochs;
  std::string augmentation;
  train->add_option("--epochs", epochs, "override train.epochs");
  train->add_option("--augmentation", augmentation, "none | mixup | starmix")
      ->check(CLI::IsMember({"none", "mixup", "starmix"}));

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "top-1 and EER of a checkpoint on the test split");
  auto* roc = app.add_subcommand("roc", "write roc.csv and eer.json");
  auto* occ = app.add_subcommand("occlusion", "accuracy under random square occluders");
  auto* cam = app.add_subcommand("cam", "gradient-weighted activation map of one image");
  for (auto* sub : {eval, roc, occ, cam}) {
    sub->add_option("--checkpoint", checkpoint, "checkpoint file (default <out>/checkpoint.slkc)");
  }
  std::string image;
  int class_index = 0;
  std::optional<int> stage;
  cam->add_option("--image", image, "input image")->required();
  cam->add_option("--class", class_index, "class index")->required();
  cam->add_option("--stage", stage, "stage 0..3 (default: deepest stage at least 2x2)");

  auto* preview = app.add_subcommand("mix-preview", "write a StarMix mask and optionally a blend");
  double lambda = 0.5;
  int size = 224;
  std::string image_a, image_b;
  preview->add_option("--lambda", lambda, "mixing ratio in (0,1)")->required();
  preview->add_option("--size", size, "mask side");
  preview->add_option("--image-a", image_a, "first image to blend");
  preview->add_option("--image-b", image_b, "second image to blend");

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic vein dataset");
  starlk::data::SyntheticVeinSpec spec;
  gen->add_option("--classes", spec.num_classes);
  gen->add_option("--images", spec.images_per_class, "images per class");
  gen->add_option("--side", spec.side);
  gen->add_option("--min-veins", spec.min_veins);
  gen->add_option("--max-veins", spec.max_veins);
  gen->add_option("--min-thickness", spec.min_thickness);
  gen->add_option("--max-thickness", spec.max_thickness);
  gen->add_option("--contrast", spec.contrast);
  gen->add_option("--contrast-jitter", spec.contrast_jitter);
  gen->add_option("--noise", spec.noise);
  gen->add_option("--max-shift", spec.max_shift);
  gen->add_option("--synthetic-seed", spec.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = Resolve(g);
    if (*train) {
      if (epochs) config.epochs = *epochs;
      if (!augmentation.empty()) config.augmentation = starlk::app::ParseAugmentation(augmentation);
      config.Validate();
      starlk::app::TrainOptions opts;
      opts.on_epoch = [&](const starlk::eval::EpochRecord& e) {
        std::printf("epoch %3d  loss %.4f  top1 %.4f  lr %.5f\n", e.epoch, e.loss, e.top1, e.lr);
        std::fflush(stdout);
      };
      const auto record = starlk::app::Train(config, opts);
      if (record.final_top1) std::printf("final_top1 %.4f\n", *record.final_top1);
      if (record.eer) std::printf("eer %.4f\n", *record.eer);
      std::printf("run written to %s\n", config.out_dir.c_str());
    } else if (*eval) {
      const auto m = starlk::app::CmdEval(config, checkpoint);
      std::printf("top1 %.4f\neer %.4f\ntest_images %zu\n", m.top1, m.eer, m.test_images);
    } else if (*roc) {
      const auto curve = starlk::app::CmdRoc(config, checkpoint);
      std::printf("eer %.4f at threshold %.4f\n", curve.eer, curve.eer_threshold);
    } else if (*occ) {
      const auto report = starlk::app::CmdOcclusion(config, checkpoint);
      std::cout << report.ToCsv();
    } else if (*cam) {
      if (stage) config.cam_stage = *stage;
      config.Validate();
      starlk::app::CmdCam(config, checkpoint, image, class_index);
      std::printf("wrote %s\n", (fs::path(config.out_dir) / "cam.pgm").c_str());
    } else if (*preview) {
      std::optional<fs::path> a, b;
      if (!image_a.empty()) a = image_a;
      if (!image_b.empty()) b = image_b;
      const auto p = starlk::app::CmdMixPreview(lambda, size, config.MixParams(), config.out_dir, a, b);
      std::printf("lambda=%.6f\nlambda_hat=%.6f\npath=%s\nmask=%s\n", p.lambda, p.lambda_hat,
                  starlk::mix::ToString(p.path).c_str(), p.mask_file.c_str());
    } else if (*gen) {
      const auto m = starlk::app::CmdGenSynthetic(spec, config.out_dir);
      std::printf("wrote %zu images in %zu classes to %s\n", m.entries.size(), m.classes.size(),
                  config.out_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "starlk: %s\n", e.what());
    return 1;
  }
  return 0;
}
