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

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lerptext/corpus.hpp"
#include "lerptext/model.hpp"

namespace lerptext::testing {

inline ModelConfig tiny_config(int vocab = 32, int d = 8) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d;
  c.heads = 2;
  c.ff_dim = 2 * d;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.max_length = 16;
  return c;
}

inline TokenSequence seq(std::vector<int> ids) { return TokenSequence{std::move(ids)}; }

/// Random content-token sequence of the given length.
inline TokenSequence random_seq(std::mt19937_64& rng, int length, int vocab) {
  std::uniform_int_distribution<int> tok(kNumSpecialTokens, vocab - 1);
  TokenSequence x;
  for (int i = 0; i < length; ++i) x.ids.push_back(tok(rng));
  return x;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lerptext_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rel_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace lerptext::testing
