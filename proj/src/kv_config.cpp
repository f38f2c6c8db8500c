// Copyright 2026 The lerptext Authors. All Rights Reserved.
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

#include "lerptext/kv_config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <stdexcept>

namespace lerptext::kv {

namespace {

void flatten(const YAML::Node& node, const std::string& prefix, Entries& out) {
  if (node.IsMap()) {
    for (const auto& it : node) {
      const auto key = it.first.as<std::string>();
      flatten(it.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.IsScalar()) {
    out.emplace_back(prefix, node.Scalar());
  } else if (node.IsNull()) {
    out.emplace_back(prefix, "");
  } else {
    throw std::invalid_argument("config key " + prefix + ": expected a scalar value");
  }
}

std::invalid_argument bad_value(std::string_view key, std::string_view value,
                                const char* what) {
  return std::invalid_argument("config key " + std::string(key) + ": '" +
                               std::string(value) + "' is not " + what);
}

}  // namespace

Entries parse(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  Entries out;
  if (root.IsNull()) return out;
  if (!root.IsMap()) throw std::invalid_argument("config must be a key: value map");
  flatten(root, "", out);
  return out;
}

std::string render(const Entries& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + ": " + v + "\n";
  return out;
}

int to_int(std::string_view key, std::string_view value) {
  int v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw bad_value(key, value, "an integer");
  }
  return v;
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw bad_value(key, value, "a non-negative integer");
  }
  return v;
}

double to_double(std::string_view key, std::string_view value) {
  double v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw bad_value(key, value, "a number");
  }
  return v;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw bad_value(key, value, "a boolean");
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, p);
}

}  // namespace lerptext::kv
