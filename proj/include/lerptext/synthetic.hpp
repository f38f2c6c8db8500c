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
#include <filesystem>
#include <string>
#include <vector>

// Templated toy text used by the tests, the acceptance suite and the CLI's
// `synth` command. Sentences are review-like; the polarity of the slot
// adjectives decides the class.
namespace lerptext::synthetic {

struct LabeledText {
  std::string text;
  int label = 0;  // 1 positive, 0 negative
};

struct LabeledPair {
  std::string premise;
  std::string hypothesis;
  int label = 0;
};

/// `count` sentences from the review templates, deterministic in `seed`.
std::vector<std::string> review_corpus(int count, std::uint64_t seed);

/// Sentences with a uniformly drawn polarity; label follows the polarity.
std::vector<LabeledText> sentiment_task(int count, std::uint64_t seed);

/// Two-sentence records, label 1 when both halves share polarity.
std::vector<LabeledPair> agreement_task(int count, std::uint64_t seed);

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
void write_jsonl(const std::filesystem::path& path, const std::vector<LabeledText>& rows);
void write_jsonl(const std::filesystem::path& path, const std::vector<LabeledPair>& rows);

}  // namespace lerptext::synthetic
