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

#include "starlk/app/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "starlk/data/synthetic.hpp"
#include "starlk/mix/starmix.hpp"
#include "starlk/nn/checkpoint.hpp"
#include "starlk/nn/ops.hpp"
#include "starlk/nn/optim.hpp"

namespace starlk::app {
namespace fs = std::filesystem;
namespace {

// Independent random streams hanging off the run seed.
enum Stream : std::uint64_t {
  kInitStream = 1,
  kShuffleStream = 2,
  kAugmentStream = 3,
  kMixStream = 4,
  kPairStream = 5,
};

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory '" + dir.string() + "'");
}

void WriteText(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  out << text;
}

fs::path DefaultCheckpoint(const RunConfig& config, const fs::path& checkpoint) {
  return checkpoint.empty() ? fs::path(config.out_dir) / "checkpoint.slkc" : checkpoint;
}

double ScheduledLr(const RunConfig& c, int epoch) {
  return c.scheduler == Scheduler::kCosine ? nn::CosineLr(epoch, c.epochs, c.lr) : c.lr;
}

eval::ScoreSet TestScores(laknet::Model& model, const data::ImageSet& test, const RunConfig& config) {
  eval::PairingPolicy policy;
  policy.impostor_ratio = config.impostor_ratio;
  policy.max_genuine = config.max_genuine;
  policy.seed = MixSeed(config.seed, kPairStream);
  return eval::ScorePairs(eval::Embed(model, test.Stack(), config.eval_batch), test.labels, policy);
}

}  // namespace

Workspace PrepareWorkspace(const RunConfig& config) {
  config.Validate();
  const fs::path out(config.out_dir);
  EnsureDir(out);
  Workspace ws;
  if (config.data_root.empty()) {
    ws.manifest = data::GenerateSynthetic(config.synthetic, out / "dataset");
  } else {
    ws.manifest = data::ScanDataset(config.data_root, {config.split_seed}, config.synthetic.side);
  }
  ws.manifest.Validate();

  const int classes = static_cast<int>(ws.manifest.classes.size());
  if (config.num_classes != 0 && config.num_classes != classes) {
    throw std::invalid_argument("model.num_classes is " + std::to_string(config.num_classes) + " but the dataset has " +
                                std::to_string(classes) + " classes");
  }
  if (!config.model_file.empty()) {
    ws.model = laknet::LaKNetConfig::Load(config.model_file);
    if (ws.model.num_classes != classes) {
      throw std::invalid_argument("model file num_classes " + std::to_string(ws.model.num_classes) +
                                  " does not match the dataset's " + std::to_string(classes) + " classes");
    }
  } else {
    ws.model = config.model_preset == "full" ? laknet::LaKNetConfig::Full(classes) : laknet::LaKNetConfig::Toy(classes);
  }
  ws.model.Validate();
  ws.manifest.image_side = ws.model.input_side;
  data::WriteManifest(ws.manifest, out / "manifest.txt");
  return ws;
}

std::string RunRecord::ToJson() const {
  nlohmann::ordered_json j;
  j["augmentation"] = ToString(config.augmentation);
  j["seed"] = config.seed;
  j["precision"] = ToString(config.precision);
  j["epochs"] = history.size();
  j["final_top1"] = final_top1 ? nlohmann::ordered_json(*final_top1) : nlohmann::ordered_json(nullptr);
  j["final_top1_full_window"] = final_top1_full_window;
  j["best_top1"] = best_top1;
  j["eer"] = eer ? nlohmann::ordered_json(*eer) : nlohmann::ordered_json(nullptr);
  j["star_steps"] = star_steps;
  j["vanilla_steps"] = vanilla_steps;
  j["parameter_count"] = parameter_count;
  j["checkpoint"] = checkpoint.string();
  j["best_checkpoint"] = best_checkpoint.string();
  j["wall_seconds"] = wall_seconds;
  auto& h = j["history"] = nlohmann::ordered_json::array();
  for (const auto& e : history.epochs) {
    h.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"top1", e.top1}, {"lr", e.lr}});
  }
  j["config"] = config.Emit();
  return j.dump(2) + "\n";
}

RunRecord Train(const RunConfig& config, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  nn::PrecisionGuard precision(config.precision);
  const Workspace ws = PrepareWorkspace(config);
  const data::ImageSet train = data::LoadSplit(ws.manifest, data::Split::kTrain);
  const data::ImageSet test = data::LoadSplit(ws.manifest, data::Split::kTest);
  if (train.size() < 2) throw std::invalid_argument("training needs at least 2 images, found " + std::to_string(train.size()));
  const nn::Tensor test_images = test.Stack();

  laknet::Model model(ws.model, MixSeed(config.seed, kInitStream));
  nn::OptimizerState optimizer(config.OptimizerConfig(), model.parameters());
  const mix::MixParams mix_params = config.MixParams();
  const int num_classes = ws.model.num_classes;

  RunRecord record;
  record.config = config;
  record.parameter_count = model.ParameterCount();
  const fs::path out(config.out_dir);
  record.checkpoint = out / "checkpoint.slkc";
  record.best_checkpoint = out / "best.slkc";
  if (options.write_outputs) WriteText(out / "config.ini", config.Emit());
  if (options.write_outputs) ws.model.Save(out / "model.txt");

  const Rng augment_root = Rng(config.seed).Derive(kAugmentStream);
  const Rng mix_root = Rng(config.seed).Derive(kMixStream);
  const std::uint64_t shuffle_seed = MixSeed(config.seed, kShuffleStream);
  bool have_best = false;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = ScheduledLr(config, epoch);
    model.SetMode(nn::Mode::kTrain);
    Rng augment_rng = augment_root.Derive(static_cast<std::uint64_t>(epoch));
    Rng mix_rng = mix_root.Derive(static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    const auto batches = data::EpochBatches(train.size(), config.batch_size, shuffle_seed, epoch);
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const data::Batch batch = data::AssembleBatch(train, batches[step], config.augment, augment_rng);
      nn::Tensor images = batch.images;
      nn::Tensor targets = data::OneHot(batch.labels, num_classes);
      if (config.augmentation != Augmentation::kNone) {
        const mix::MixedBatch mixed = mix::MixBatch(images, targets, mix_params, mix_rng);
        (mixed.path == mix::MixPath::kStar ? record.star_steps : record.vanilla_steps)++;
        images = mixed.images;
        targets = mixed.soft_labels;
      }
      model.ZeroGrad();
      const nn::Tensor loss = nn::SoftCrossEntropy(model.Forward(images), targets);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step));
      }
      loss.Backward();
      nn::OptimizerStep(model.parameters(), optimizer, lr);
      loss_sum += value * static_cast<double>(batches[step].size());
      seen += batches[step].size();
    }
    eval::EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(seen);
    rec.top1 = eval::Accuracy(model, test_images, test.labels, config.eval_batch);
    rec.lr = lr;
    record.history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (!have_best || rec.top1 > record.best_top1) {
      have_best = true;
      record.best_top1 = rec.top1;
      if (options.write_outputs) nn::WriteCheckpoint(record.best_checkpoint, model.ToCheckpoint(config.seed));
    }
  }
  model.SetMode(nn::Mode::kEval);

  if (!record.history.epochs.empty()) {
    const auto f = eval::FinalTop1Of(record.history);
    record.final_top1 = f.value;
    record.final_top1_full_window = f.full_window;
  }
  if (options.final_eer && test.size() >= 2) {
    const eval::ScoreSet scores = TestScores(model, test, config);
    if (!scores.genuine.empty() && !scores.impostor.empty()) {
      record.eer = eval::SweepRoc(scores, config.num_thresholds).eer;
    }
  }
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (options.write_outputs) {
    nn::WriteCheckpoint(record.checkpoint, model.ToCheckpoint(config.seed));
    if (!have_best) nn::WriteCheckpoint(record.best_checkpoint, model.ToCheckpoint(config.seed));
    WriteText(out / "history.csv", record.history.ToCsv());
    WriteText(out / "run.json", record.ToJson());
  }
  return record;
}

laknet::Model LoadTrainedModel(const RunConfig& config, const Workspace& ws, const fs::path& checkpoint) {
  const fs::path file = DefaultCheckpoint(config, checkpoint);
  laknet::Model model(ws.model, MixSeed(config.seed, kInitStream));
  model.LoadCheckpoint(nn::ReadCheckpoint(file));
  model.SetMode(nn::Mode::kEval);
  return model;
}

EvalMetrics CmdEval(const RunConfig& config, const fs::path& checkpoint) {
  nn::PrecisionGuard precision(config.precision);
  const Workspace ws = PrepareWorkspace(config);
  laknet::Model model = LoadTrainedModel(config, ws, checkpoint);
  const data::ImageSet test = data::LoadSplit(ws.manifest, data::Split::kTest);
  EvalMetrics m;
  m.test_images = test.size();
  m.top1 = eval::Accuracy(model, test.Stack(), test.labels, config.eval_batch);
  const eval::ScoreSet scores = TestScores(model, test, config);
  m.eer = eval::SweepRoc(scores, config.num_thresholds).eer;
  nlohmann::ordered_json j;
  j["top1"] = m.top1;
  j["eer"] = m.eer;
  j["test_images"] = m.test_images;
  WriteText(fs::path(config.out_dir) / "eval.json", j.dump(2) + "\n");
  return m;
}

eval::RocCurve CmdRoc(const RunConfig& config, const fs::path& checkpoint) {
  nn::PrecisionGuard precision(config.precision);
  const Workspace ws = PrepareWorkspace(config);
  laknet::Model model = LoadTrainedModel(config, ws, checkpoint);
  const data::ImageSet test = data::LoadSplit(ws.manifest, data::Split::kTest);
  const eval::ScoreSet scores = TestScores(model, test, config);
  const eval::RocCurve curve = eval::SweepRoc(scores, config.num_thresholds);
  eval::WriteRocCsv(curve, fs::path(config.out_dir) / "roc.csv");
  WriteText(fs::path(config.out_dir) / "eer.json", eval::EerSummary(curve, scores));
  return curve;
}

eval::OcclusionReport CmdOcclusion(const RunConfig& config, const fs::path& checkpoint) {
  nn::PrecisionGuard precision(config.precision);
  const Workspace ws = PrepareWorkspace(config);
  laknet::Model model = LoadTrainedModel(config, ws, checkpoint);
  const data::ImageSet test = data::LoadSplit(ws.manifest, data::Split::kTest);
  eval::OcclusionOptions opts;
  opts.ratios = config.occlusion_ratios;
  opts.patch_side = config.patch_side;
  opts.seed = config.seed;
  opts.batch = config.eval_batch;
  eval::OcclusionReport report = eval::OcclusionSweep(model, test.Stack(), test.labels, opts);
  WriteText(fs::path(config.out_dir) / "occlusion.csv", report.ToCsv());
  return report;
}

Plane CmdCam(const RunConfig& config, const fs::path& checkpoint, const fs::path& image, int class_index) {
  nn::PrecisionGuard precision(config.precision);
  const Workspace ws = PrepareWorkspace(config);
  laknet::Model model = LoadTrainedModel(config, ws, checkpoint);
  const int side = ws.model.input_side;
  const nn::Tensor x = data::LoadImage(image, side);
  const nn::Tensor batch = nn::Tensor::FromData({1, 1, side, side}, std::vector<double>(x.data().begin(), x.data().end()));
  std::optional<int> stage;
  if (config.cam_stage >= 0) stage = config.cam_stage;
  Plane map = eval::ActivationMap(model, batch, class_index, stage);
  WritePgm(fs::path(config.out_dir) / "cam.pgm", map);
  return map;
}

MixPreview CmdMixPreview(double lambda, int size, const mix::MixParams& params, const fs::path& out,
                         const std::optional<fs::path>& image_a, const std::optional<fs::path>& image_b) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("mix-preview lambda must lie in (0, 1), got " + std::to_string(lambda));
  }
  if (image_a.has_value() != image_b.has_value()) {
    throw std::invalid_argument("mix-preview blends need both images");
  }
  params.Validate();
  EnsureDir(out);
  const mix::StarMask mask = mix::BuildStarMask(lambda, size, size);
  char tag[32];
  std::snprintf(tag, sizeof(tag), "%.3f", lambda);
  MixPreview preview;
  preview.lambda = lambda;
  preview.lambda_hat = mask.lambda_hat;
  preview.path = mix::RoutePath(lambda, params);
  mix::ExportMaskPreview(mask, params, out / ("mask_" + std::string(tag)));
  preview.mask_file = out / ("mask_" + std::string(tag) + ".pgm");
  if (image_a) {
    const nn::Tensor a = data::LoadImage(*image_a, size);
    const nn::Tensor b = data::LoadImage(*image_b, size);
    const nn::Tensor y_a = nn::Tensor::FromData({2}, {1.0, 0.0});
    const nn::Tensor y_b = nn::Tensor::FromData({2}, {0.0, 1.0});
    const mix::MixedPair pair = preview.path == mix::MixPath::kStar ? mix::StarmixPair(a, y_a, b, y_b, mask)
                                                                    : mix::MixupPair(a, y_a, b, y_b, lambda);
    Plane blend(size, size);
    std::copy(pair.image.data().begin(), pair.image.data().end(), blend.values.begin());
    preview.blend_file = out / ("blend_" + std::string(tag) + ".pgm");
    WritePgm(*preview.blend_file, blend);
  }
  return preview;
}

data::DatasetManifest CmdGenSynthetic(const data::SyntheticVeinSpec& spec, const fs::path& out) {
  return data::GenerateSynthetic(spec, out);
}

}  // namespace starlk::app
