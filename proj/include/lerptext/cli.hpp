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
#include <stdexcept>
#include <string>
#include <vector>

#include "lerptext/augmentation.hpp"
#include "lerptext/classifier.hpp"
#include "lerptext/decoding.hpp"
#include "lerptext/evaluation.hpp"
#include "lerptext/kv_config.hpp"
#include "lerptext/model.hpp"
#include "lerptext/training.hpp"

namespace lerptext::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Bad command line or configuration; `run` maps it to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;  // train, interpolate, augment, sweep, experiment, inspect-ckpt, synth

  std::filesystem::path config_file;
  std::filesystem::path corpus;
  std::filesystem::path data;
  std::filesystem::path test;
  std::filesystem::path ckpt;
  std::filesystem::path vocab;
  std::filesystem::path out;

  TaskKind task = TaskKind::kSingleSentence;
  int workers = 1;

  ModelConfig model;      // vocab_size is the cap on vocabulary growth
  TrainingConfig train;
  DecodeConfig decode;

  // interpolate
  std::string text_a;
  std::string text_b;
  double alpha = 0.5;

  // augment
  LabelPolicyKind policy = LabelPolicyKind::kInterpolated;
  double temperature = 1.0;
  bool literal_orientation = false;
  std::string alpha_dist = "uniform";
  std::uint64_t augment_seed = 0;
  int max_redraws = 8;

  // sweep
  std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int sweep_pairs = 200;
  std::uint64_t sweep_seed = 0;

  // experiment
  std::vector<std::string> methods = {"vanilla", "linda"};
  int shots = 10;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  ClassifierConfig classifier;

  // synth
  int synth_count = 2000;
  int synth_test_count = 400;
  std::uint64_t synth_seed = 0;

  RunConfig();
};

/// Sets one setting from its dotted key; unknown keys and out-of-range
/// values throw std::invalid_argument.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Every setting as (dotted key, value), suitable for a config file.
kv::Entries resolved_settings(const RunConfig& cfg);

/// Precedence: flag > LERPTEXT_WORKERS > config file > default. Relative
/// output paths are placed under LERPTEXT_OUTPUT_ROOT when it is set.
/// Throws UsageError naming the offending token.
RunConfig parse_args(const std::vector<std::string>& args);

/// Dispatches and returns the process exit status. Errors are reported on
/// stderr.
int run(const RunConfig& cfg);

/// parse_args + run, with --help and usage errors handled.
int main(int argc, char** argv);

}  // namespace lerptext::cli
