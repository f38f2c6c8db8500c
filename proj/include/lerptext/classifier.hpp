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
#include <span>
#include <string>
#include <vector>

#include "lerptext/autograd.hpp"
#include "lerptext/corpus.hpp"
#include "lerptext/labels.hpp"

namespace lerptext {

struct ClassifierConfig {
  int embed_dim = 32;
  int hidden_dim = 32;
  int epochs = 40;
  int batch_size = 8;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A training example with a distribution target.
struct SoftExample {
  std::vector<TokenSequence> texts;
  SoftLabel target;
};

/// Mean-pooled embedding encoder, one hidden layer, softmax output. Pair
/// inputs pool each text separately and concatenate the pooled vectors.
class ClassifierModel {
 public:
  ClassifierModel(const Vocabulary& vocab, int num_classes, int texts_per_example,
                  const ClassifierConfig& config);

  int num_classes() const { return num_classes_; }
  int texts_per_example() const { return texts_per_example_; }
  const std::string& vocab_hash() const { return vocab_hash_; }
  int vocab_size() const { return static_cast<int>(embedding_.value.rows()); }

  std::vector<ag::Parameter*> parameters();

  /// Logits for a batch, one row per example.
  ag::Var logits(ag::Graph& g, std::span<const std::vector<TokenSequence>> inputs) const;

  /// Softmax distribution over classes.
  SoftLabel predict(const std::vector<TokenSequence>& texts) const;
  /// Argmax, ties to the lower class index.
  int predict_class(const std::vector<TokenSequence>& texts) const;

 private:
  int num_classes_;
  int texts_per_example_;
  std::string vocab_hash_;
  ag::Parameter embedding_;
  ag::Parameter hidden_w_, hidden_b_;
  ag::Parameter out_w_, out_b_;
};

/// Minimizes mean -sum_c y_c log p(c | x) with Adam; deterministic in
/// config.seed. `loss_log` receives the mean loss of every minibatch.
ClassifierModel train_classifier(std::span<const SoftExample> data,
                                 const Vocabulary& vocab, int num_classes,
                                 const ClassifierConfig& config,
                                 std::vector<double>* loss_log = nullptr);

struct ClassifierEval {
  double accuracy = 0.0;
  std::vector<int> correct_per_class;
  std::vector<int> total_per_class;
};

ClassifierEval evaluate_classifier(const ClassifierModel& model, const Dataset& test);

/// Hard-labeled dataset examples as one-hot soft examples.
std::vector<SoftExample> to_soft_examples(const Dataset& data);

}  // namespace lerptext
