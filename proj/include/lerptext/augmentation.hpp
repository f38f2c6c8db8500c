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
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lerptext/corpus.hpp"
#include "lerptext/decoding.hpp"
#include "lerptext/labels.hpp"
#include "lerptext/model.hpp"

namespace lerptext {

class ClassifierModel;

enum class LabelPolicyKind { kInterpolated, kSharpened, kTeacher };

struct LabelPolicy {
  LabelPolicyKind kind = LabelPolicyKind::kInterpolated;
  double temperature = 1.0;                  // sharpened only
  const ClassifierModel* teacher = nullptr;  // teacher only
  /// Weight alpha on y^b instead of y^a (the text tracks x^a as alpha -> 1).
  bool literal_orientation = false;

  void validate() const;
};

std::string_view to_string(LabelPolicyKind kind);
LabelPolicyKind parse_label_policy(std::string_view s);

/// alpha * y^a + (1 - alpha) * y^b; class indices become one-hot first.
SoftLabel interpolate_labels(const Label& ya, const Label& yb, MixRatio alpha,
                             int num_classes);
SoftLabel interpolate_labels(const SoftLabel& ya, const SoftLabel& yb, MixRatio alpha);

/// Power normalization y_i^(1/T) / sum_j y_j^(1/T). T = 1 is the identity
/// and T -> 0 approaches the one-hot argmax.
SoftLabel sharpen(const SoftLabel& y, double temperature);

/// The teacher's full predictive distribution for `texts`.
SoftLabel teacher_label(std::span<const TokenSequence> texts,
                        const Vocabulary& text_vocab,
                        const ClassifierModel& teacher);

/// Sampling distribution for alpha: Uniform(0, 1), Beta(a, b), or a fixed
/// discrete set drawn uniformly.
struct AlphaDistribution {
  enum class Kind { kUniform, kBeta, kChoice } kind = Kind::kUniform;
  double beta_a = 1.0;
  double beta_b = 1.0;
  std::vector<double> choices;

  double draw(std::mt19937_64& rng) const;
  static AlphaDistribution parse(std::string_view spec);  // "uniform", "beta:a,b", "choice:0,1"
  std::string describe() const;
};

struct AugmentedExample {
  std::vector<TokenSequence> texts;  // one entry, or premise + hypothesis
  SoftLabel soft_label;
  double alpha = 0.0;
  int source_a = -1;
  int source_b = -1;
  bool truncated = false;
};

struct AugmentStats {
  int redraws = 0;     // records replaced after a decode failure
  int empty = 0;       // generations with no content tokens
  int copies = 0;      // generations identical to one of the sources
};

struct AugmentOptions {
  AlphaDistribution alpha;
  std::uint64_t seed = 0;
  int workers = 1;
  /// Replacement pairs tried per record when decoding fails.
  int max_redraws = 8;
};

/// One augmented record per input example. Pairs are drawn uniformly from
/// the dataset with a per-record RNG stream derived from (seed, index); for
/// pair tasks premise and hypothesis are interpolated separately with the
/// same alpha.
std::vector<AugmentedExample> augment_dataset(const Dataset& data,
                                              const InterpModel& model,
                                              const Vocabulary& vocab,
                                              const LabelPolicy& policy,
                                              const DecodeConfig& decode,
                                              const AugmentOptions& options,
                                              AugmentStats* stats = nullptr);

/// JSONL with text (or premise/hypothesis), soft_label, alpha, source_a,
/// source_b.
void write_augmented_jsonl(std::ostream& out, std::span<const AugmentedExample> rows,
                           const Vocabulary& vocab, TaskKind task_kind);
void write_augmented_jsonl(const std::filesystem::path& path,
                           std::span<const AugmentedExample> rows,
                           const Vocabulary& vocab, TaskKind task_kind);

/// Loads augmented JSONL back as soft-labeled examples.
std::vector<AugmentedExample> read_augmented_jsonl(const std::filesystem::path& path,
                                                   const Vocabulary& vocab,
                                                   TaskKind task_kind,
                                                   int max_length = kDefaultMaxLength);

}  // namespace lerptext
