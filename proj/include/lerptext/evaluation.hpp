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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lerptext/augmentation.hpp"
#include "lerptext/classifier.hpp"
#include "lerptext/corpus.hpp"
#include "lerptext/decoding.hpp"
#include "lerptext/model.hpp"
#include "lerptext/training.hpp"

namespace lerptext {

/// Clipped unigram precision sum_w min(c_hyp(w), c_ref(w)) / |hyp| over
/// content tokens (specials are ignored on both sides).
double unigram_precision(const TokenSequence& hyp, const TokenSequence& ref);

struct PrecisionCurve {
  std::vector<double> alphas;
  std::vector<double> mean_precision_a;
  std::vector<double> std_a;
  std::vector<double> mean_precision_b;
  std::vector<double> std_b;
  int n_pairs = 0;
};

/// Decodes every pair at every grid point. A decode with no content tokens
/// scores 0 against both sources.
PrecisionCurve alpha_sweep(const InterpModel& model, std::span<const TokenPair> pairs,
                           std::span<const double> grid, const DecodeConfig& cfg,
                           int workers = 1);

void write_sweep_csv(std::ostream& out, const PrecisionCurve& curve);
void write_sweep_csv(const std::filesystem::path& path, const PrecisionCurve& curve);
/// Two-series line chart of precision against alpha.
void write_sweep_svg(const std::filesystem::path& path, const PrecisionCurve& curve);

/// Spearman correlation with average ranks for ties. A constant series has
/// correlation 0 and sets `constant`.
double rank_correlation(std::span<const double> x, std::span<const double> y,
                        bool* constant = nullptr);

struct Monotonicity {
  double rho_a = 0.0;
  double rho_b = 0.0;
  bool constant_a = false;
  bool constant_b = false;
};

Monotonicity monotonicity_score(const PrecisionCurve& curve);

/// Fraction of pairs whose decoder log-likelihood under the alpha state is
/// higher for x^a than for x^b.
double source_preference(const InterpModel& model, std::span<const TokenPair> pairs,
                         MixRatio alpha);

/// k examples per class drawn without replacement; requires hard labels.
Dataset sample_k_shot(const Dataset& data, int k, std::uint64_t seed);

struct MethodSpec {
  enum class Kind { kVanilla, kLinda } kind = Kind::kVanilla;
  LabelPolicyKind policy = LabelPolicyKind::kInterpolated;
  double temperature = 1.0;

  std::string method_name() const;
  std::string policy_name() const;
  /// "vanilla", "linda", "linda:sharpened:0.5", "linda:teacher".
  static MethodSpec parse(std::string_view s);
};

struct ExperimentConfig {
  int shots = 10;  // per class; 0 trains on the full set
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<MethodSpec> methods;
  ClassifierConfig classifier;
  DecodeConfig decode;
  AlphaDistribution alpha;
  bool literal_orientation = false;
  int workers = 1;
};

struct ExperimentRow {
  std::string method;
  std::string policy;
  int shots = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct ExperimentSummary {
  std::string method;
  std::string policy;
  int shots = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over seeds
  int runs = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentSummary> summary;
};

/// `model` may be null when only vanilla runs are requested.
ExperimentResult experiment_suite(const Dataset& train, const Dataset& test,
                                  const InterpModel* model, const Vocabulary& vocab,
                                  const ExperimentConfig& config);

std::vector<ExperimentSummary> summarize(std::span<const ExperimentRow> rows);
void write_experiment_csv(const std::filesystem::path& path, std::span<const ExperimentRow> rows);
void write_summary_table(std::ostream& out, std::span<const ExperimentSummary> summary);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(std::span<const double> xs);

}  // namespace lerptext
