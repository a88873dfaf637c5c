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

#include "starlk/kv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace starlk::kv {
namespace {

[[noreturn]] void Bad(const Entry& e, const std::string& what) {
  throw std::invalid_argument("line " + std::to_string(e.line) + ": key '" + e.key + "': " + what +
                              " (got '" + e.value + "')");
}

}  // namespace

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(Trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<Entry> Parse(const std::string& text) {
  std::vector<Entry> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (auto hash = s.find('#'); hash != std::string::npos) s = s.substr(0, hash);
    s = Trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw std::invalid_argument("line " + std::to_string(line) + ": malformed section header");
      section = Trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line) + ": expected key = value");
    }
    Entry e{section, Trim(s.substr(0, eq)), Trim(s.substr(eq + 1)), line};
    if (e.key.empty()) throw std::invalid_argument("line " + std::to_string(line) + ": empty key");
    if (!seen.emplace(section, e.key).second) {
      throw std::invalid_argument("line " + std::to_string(line) + ": duplicate key '" + e.key + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

int ToInt(const Entry& e) {
  int v = 0;
  const auto* first = e.value.data();
  const auto* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) Bad(e, "expected an integer");
  return v;
}

double ToDouble(const Entry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size() || !std::isfinite(v)) Bad(e, "expected a finite number");
    return v;
  } catch (const std::invalid_argument&) {
    Bad(e, "expected a number");
  } catch (const std::out_of_range&) {
    Bad(e, "number out of range");
  }
}

bool ToBool(const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  Bad(e, "expected true|false");
}

std::vector<int> ToIntList(const Entry& e) {
  std::vector<int> out;
  for (const auto& part : Split(e.value, ',')) {
    Entry item = e;
    item.value = part;
    out.push_back(ToInt(item));
  }
  return out;
}

std::string JoinInts(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace starlk::kv
