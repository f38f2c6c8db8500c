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
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lerptext/autograd.hpp"
#include "lerptext/corpus.hpp"
#include "lerptext/model.hpp"

namespace lerptext {

enum class AlphaSampling { kPerExample, kPerMinibatch };

struct TrainingConfig {
  int batch_size = 16;
  double learning_rate = 3e-4;
  int steps = 2000;
  double p_mask = 0.1;
  double lambda = 0.001;
  double noise_std = 0.001;
  std::uint64_t seed = 1;
  AlphaSampling alpha_sampling = AlphaSampling::kPerExample;
  int warmup_steps = 100;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  int checkpoint_every = 0;  // 0: only the final checkpoint

  /// Batch 8 and a fixed 1e-5 learning rate, for large pretrained models.
  static TrainingConfig finetune_preset();

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

/// Sets one field from its textual form; unknown keys throw.
void set_field(TrainingConfig& cfg, std::string_view key, std::string_view value);
/// All fields as (key, value) text, in declaration order.
std::vector<std::pair<std::string, std::string>> fields(const TrainingConfig& cfg);
/// Parses "key: value" lines; '#' starts a comment.
TrainingConfig parse_training_config(std::string_view text);
std::string to_text(const TrainingConfig& cfg);

enum class Mode { kTrain, kEval };

struct TokenPair {
  TokenSequence a;
  TokenSequence b;
};

/// Replaces each token by MASK independently with probability p_mask.
TokenSequence mask_tokens(const TokenSequence& x, double p_mask, std::mt19937_64& rng);

/// Graph-level result of the weighted two-way reconstruction loss.
struct LindaForward {
  ag::Var loss;             // -(1/M) sum_m [a_m log p(x^a) + (1 - a_m) log p(x^b)]
  ag::Var encoder_outputs;  // pre-noise encoder vectors, a-side then b-side
  std::vector<double> logp_a;
  std::vector<double> logp_b;
  double max_abs_h = 0.0;
};

/// Builds the minibatch objective on `g`. In training mode the encoder
/// inputs are masked and Gaussian noise is added to the encoder outputs
/// before length conversion; all randomness is drawn from `seed`.
/// Reconstruction targets are always the clean sequences.
LindaForward linda_batch_loss(ag::Graph& g, const InterpModel& model,
                              std::span<const TokenPair> pairs,
                              std::span<const double> alphas,
                              const TrainingConfig& cfg, Mode mode,
                              std::uint64_t seed);

/// batch_loss + (lambda / M) * sum of squared encoder output norms.
ag::Var regularized_loss(ag::Var batch_loss, ag::Var encoder_outputs,
                         double lambda, int batch_size);
double regularized_loss(double batch_loss,
                        std::span<const EncodedSequence> encoder_outputs,
                        double lambda, int batch_size);

struct StepStats {
  double loss = 0.0;  // regularized
  double linda = 0.0;
  double penalty = 0.0;
  double recon_a = 0.0;  // mean -log p(x^a | .)
  double recon_b = 0.0;
  double alpha_mean = 0.0;
  double max_abs_h = 0.0;
};

/// Forward (and optionally backward) of the regularized loss. Gradients are
/// accumulated into the model's parameters when `with_grad` is set.
StepStats evaluate_batch(InterpModel& model, std::span<const TokenPair> pairs,
                         std::span<const double> alphas,
                         const TrainingConfig& cfg, Mode mode,
                         std::uint64_t seed, bool with_grad);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingLogRow {
  long step = 0;
  double loss = 0.0;
  double recon_a = 0.0;
  double recon_b = 0.0;
  double penalty = 0.0;
  double alpha_mean = 0.0;
};

void write_training_log(const std::filesystem::path& path,
                        std::span<const TrainingLogRow> rows);

/// Adam with bias correction, linear warmup and global-norm clipping.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ag::Parameter*> params, const TrainingConfig& cfg);
  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Returns the pre-clip gradient norm.
  double step();
  long steps_taken() const { return t_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<ag::Matrix> m_, v_;
  TrainingConfig cfg_;
  long t_ = 0;
};

struct TrainHooks {
  /// Called every `checkpoint_every` steps and after the final step.
  std::function<void(long step, const InterpModel&)> checkpoint;
  /// Called after every step with the logged row.
  std::function<void(const TrainingLogRow&)> on_step;
};

/// Deterministic shuffled pairing: each epoch draws two permutations of the
/// corpus and pairs them index-wise. Self-pairs may occur.
class PairSampler {
 public:
  PairSampler(int corpus_size, std::uint64_t seed);
  std::pair<int, int> next();

 private:
  void reshuffle();
  int n_;
  std::mt19937_64 rng_;
  std::vector<int> first_, second_;
  size_t pos_ = 0;
};

std::vector<TrainingLogRow> train(InterpModel& model,
                                  std::span<const TokenSequence> corpus,
                                  const TrainingConfig& cfg,
                                  const TrainHooks& hooks = {});

}  // namespace lerptext
