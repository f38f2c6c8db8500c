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

#include <filesystem>
#include <string>
#include <vector>

#include "lerptext/corpus.hpp"
#include "lerptext/kv_config.hpp"
#include "lerptext/model.hpp"

// File layout: 8-byte magic, u32 version, u64 header size, JSON header
// (model config, vocabulary, parameter names and shapes, metadata, payload
// digest), then every parameter as little-endian float64 in model order.
namespace lerptext {

inline constexpr int kCheckpointVersion = 1;

struct ParameterShape {
  std::string name;
  long rows = 0;
  long cols = 0;
};

struct CheckpointInfo {
  int version = 0;
  ModelConfig config;
  int vocab_size = 0;
  std::string vocab_hash;
  std::vector<ParameterShape> parameters;
  long parameter_count = 0;
  double sigma = 0.0;
  kv::Entries metadata;
};

struct LoadedCheckpoint {
  InterpModel model;
  Vocabulary vocab;
  kv::Entries metadata;
};

void save_checkpoint(const std::filesystem::path& path, const InterpModel& model,
                     const Vocabulary& vocab, const kv::Entries& metadata = {});

/// Validates magic, version, vocabulary digest, parameter names and shapes
/// and the payload digest before returning.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Header summary without materializing the model.
CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

}  // namespace lerptext
