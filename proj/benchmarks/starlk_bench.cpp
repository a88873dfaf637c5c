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

#include <benchmark/benchmark.h>

#include <vector>

#include "starlk/eval/metrics.hpp"
#include "starlk/laknet/laknet.hpp"
#include "starlk/mix/starmix.hpp"
#include "starlk/nn/ops.hpp"
#include "starlk/rng.hpp"

namespace {

using namespace starlk;

nn::Tensor Random(const nn::Shape& shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> v(n);
  for (double& x : v) x = rng.Normal();
  return nn::Tensor::FromData(shape, v, requires_grad);
}

// Depthwise large-kernel convolution at a stage-0-like geometry; the argument
// is the kernel side.
void BM_DepthwiseConv(benchmark::State& state) {
  const auto k = state.range(0);
  const auto x = Random({1, 32, 56, 56}, 1);
  const auto w = Random({32, 1, k, k}, 2);
  nn::Conv2dOptions o;
  o.groups = 32;
  nn::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nn::Conv2d(x, w, o));
  state.SetItemsProcessed(state.iterations() * 32 * 56 * 56 * k * k);
}
BENCHMARK(BM_DepthwiseConv)->Arg(3)->Arg(13)->Arg(31)->Unit(benchmark::kMillisecond);

void BM_DepthwiseConvBackward(benchmark::State& state) {
  const auto k = state.range(0);
  nn::Conv2dOptions o;
  o.groups = 16;
  for (auto _ : state) {
    const auto x = Random({2, 16, 28, 28}, 1, true);
    const auto w = Random({16, 1, k, k}, 2, true);
    nn::Sum(nn::Conv2d(x, w, o)).Backward();
  }
}
BENCHMARK(BM_DepthwiseConvBackward)->Arg(7)->Arg(31)->Unit(benchmark::kMillisecond);

void BM_StarMask(benchmark::State& state) {
  const auto side = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(mix::BuildStarMask(0.5, side, side));
}
BENCHMARK(BM_StarMask)->Arg(32)->Arg(224)->Unit(benchmark::kMicrosecond);

void BM_ToyStep(benchmark::State& state) {
  laknet::Model model(laknet::LaKNetConfig::Toy(10), 1);
  const auto x = Random({32, 1, 32, 32}, 3);
  std::vector<double> y(32 * 10, 0.0);
  for (int i = 0; i < 32; ++i) y[i * 10 + i % 10] = 1.0;
  const auto target = nn::Tensor::FromData({32, 10}, y);
  for (auto _ : state) {
    model.ZeroGrad();
    nn::SoftCrossEntropy(model.Forward(x), target).Backward();
  }
}
BENCHMARK(BM_ToyStep)->Unit(benchmark::kMillisecond);

void BM_RocSweep(benchmark::State& state) {
  Rng rng(4);
  eval::ScoreSet s;
  for (int i = 0; i < state.range(0); ++i) {
    s.genuine.push_back(1.0 + 0.5 * rng.Normal());
    s.impostor.push_back(0.5 * rng.Normal());
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::SweepRoc(s));
}
BENCHMARK(BM_RocSweep)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
