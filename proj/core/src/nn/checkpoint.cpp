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

#include "starlk/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace starlk::nn {
namespace {

constexpr char kMagic[4] = {'S', 'L', 'K', 'C'};

class Writer {
 public:
  void Bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename T>
  void Le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
    }
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void Bytes(void* data, std::size_t n) {
    Need(n);
    std::memcpy(data, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T Le() {
    Need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }
  bool AtEnd() const { return pos_ == in_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw std::runtime_error("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry* Checkpoint::Find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.Bytes(kMagic, 4);
  w.Le<std::uint32_t>(checkpoint.engine_version);
  w.Le<std::uint64_t>(checkpoint.seed);
  w.Le<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& e : checkpoint.entries) {
    if (static_cast<std::int64_t>(e.values.size()) != NumElements(e.shape)) {
      throw std::invalid_argument("checkpoint entry '" + e.name + "' has " +
                                  std::to_string(e.values.size()) + " values for shape " +
                                  ShapeString(e.shape));
    }
    w.Le<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
    w.Bytes(e.name.data(), e.name.size());
    w.Le<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
    for (auto extent : e.shape) w.Le<std::uint64_t>(static_cast<std::uint64_t>(extent));
    for (float v : e.values) w.Le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
  }
  return w.Take();
}

Checkpoint DecodeCheckpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.Bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a checkpoint file (bad magic)");
  Checkpoint ck;
  ck.engine_version = r.Le<std::uint32_t>();
  if (ck.engine_version != kEngineVersion) {
    throw std::runtime_error("checkpoint engine version " + std::to_string(ck.engine_version) +
                             " is not supported (expected " + std::to_string(kEngineVersion) + ")");
  }
  ck.seed = r.Le<std::uint64_t>();
  const auto count = r.Le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name.resize(r.Le<std::uint32_t>());
    r.Bytes(e.name.data(), e.name.size());
    const auto rank = r.Le<std::uint32_t>();
    if (rank > 8) throw std::runtime_error("checkpoint entry '" + e.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::int64_t>(r.Le<std::uint64_t>()));
    e.values.resize(static_cast<std::size_t>(NumElements(e.shape)));
    for (auto& v : e.values) v = std::bit_cast<float>(r.Le<std::uint32_t>());
    ck.entries.push_back(std::move(e));
  }
  if (!r.AtEnd()) throw std::runtime_error("trailing bytes after checkpoint entries");
  return ck;
}

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = EncodeCheckpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return DecodeCheckpoint(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace starlk::nn
