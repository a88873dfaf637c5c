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

#ifndef STARLK_KV_HPP_
#define STARLK_KV_HPP_

#include <string>
#include <vector>

namespace starlk::kv {

/// One `key = value` line. `section` is the most recent `[name]` header
/// (empty before the first header).
struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

/// Parses flat key=value text. Blank lines and `#` comments are skipped;
/// duplicate keys within a section are rejected.
std::vector<Entry> Parse(const std::string& text);

std::string Trim(const std::string& s);
std::vector<std::string> Split(const std::string& s, char sep);

int ToInt(const Entry& e);
double ToDouble(const Entry& e);
bool ToBool(const Entry& e);
std::vector<int> ToIntList(const Entry& e);

std::string JoinInts(const std::vector<int>& values);
/// Shortest decimal text that reads back to the same double.
std::string FormatDouble(double value);

std::string ReadFile(const std::string& path);

}  // namespace starlk::kv

#endif  // STARLK_KV_HPP_
