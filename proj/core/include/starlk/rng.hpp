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

#ifndef STARLK_RNG_HPP_
#define STARLK_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

namespace starlk {

/// splitmix64 finalizer; derives independent stream seeds from a base seed.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

/// Seeded random source. Every stochastic routine takes one explicitly, so a
/// seed fully determines its output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  /// A child generator for stream `stream`; does not advance this one.
  Rng Derive(std::uint64_t stream) const { return Rng(MixSeed(seed_, stream)); }

  double Uniform();                       // [0, 1)
  double Uniform(double lo, double hi);   // [lo, hi)
  std::int64_t UniformInt(std::int64_t n);  // {0, ..., n-1}
  double Normal(double mean = 0.0, double stddev = 1.0);
  double Gamma(double shape);
  /// Beta(alpha, alpha) via the ratio of two Gamma(alpha) draws.
  double SymmetricBeta(double alpha);
  bool Bernoulli(double p) { return Uniform() < p; }
  /// Uniform random permutation of {0, ..., n-1} (Fisher-Yates).
  std::vector<std::int64_t> Permutation(std::int64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace starlk

#endif  // STARLK_RNG_HPP_
