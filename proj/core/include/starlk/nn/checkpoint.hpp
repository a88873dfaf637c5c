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

#ifndef STARLK_NN_CHECKPOINT_HPP_
#define STARLK_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "starlk/nn/tensor.hpp"

namespace starlk::nn {

inline constexpr std::uint32_t kEngineVersion = 1;

// On-disk layout, all integers little-endian:
//
//   char[4]  magic "SLKC"
//   u32      engine version
//   u64      rng seed
//   u32      entry count
//   entry*:  u32 name length, name bytes (UTF-8),
//            u32 rank, u64 extent[rank],
//            f32 value[prod(extent)]
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t engine_version = kEngineVersion;
  std::uint64_t seed = 0;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* Find(const std::string& name) const;
};

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& checkpoint);
Checkpoint DecodeCheckpoint(const std::vector<std::uint8_t>& bytes);

}  // namespace starlk::nn

#endif  // STARLK_NN_CHECKPOINT_HPP_
