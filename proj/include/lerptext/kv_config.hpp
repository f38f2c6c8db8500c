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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Flat "key: value" configuration text. Nested sections are flattened to
// dotted keys, so "train:\n  steps: 10" and "train.steps: 10" are the same.
namespace lerptext::kv {

using Entries = std::vector<std::pair<std::string, std::string>>;

Entries parse(std::string_view text);
std::string render(const Entries& entries);

int to_int(std::string_view key, std::string_view value);
std::uint64_t to_u64(std::string_view key, std::string_view value);
double to_double(std::string_view key, std::string_view value);
bool to_bool(std::string_view key, std::string_view value);

/// Shortest text that round-trips to the same double.
std::string format_double(double v);

}  // namespace lerptext::kv
