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
#include <vector>

#include "lerptext/autograd.hpp"
#include "lerptext/corpus.hpp"

namespace lerptext {

/// Mixing ratio in [0, 1]. Weight on the first ("a") source.
class MixRatio {
 public:
  explicit MixRatio(double alpha);
  double value() const { return alpha_; }

 private:
  double alpha_;
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 128;
  int heads = 4;
  int ff_dim = 512;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_length = kDefaultMaxLength;
  double sigma_init = 1.0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// One d-dimensional vector per source token.
struct EncodedSequence {
  ag::Matrix vectors;
  int length() const { return static_cast<int>(vectors.rows()); }
};

/// Length-converted, mixed decoder memory.
struct InterpolatedState {
  ag::Matrix vectors;  // target_length x d
  int target_length = 0;
  MixRatio alpha{0.5};
  int length_a = 0;
  int length_b = 0;
};

/// Row layout of a packed decoder batch plus its teacher-forced targets.
struct DecoderBatch {
  std::vector<int> input_ids;   // BOS + y per sequence, concatenated
  std::vector<int> target_ids;  // y + EOS per sequence, concatenated
  ag::Segments layout;
  std::vector<int> to_memory;   // memory segment attended by each sequence
};

DecoderBatch make_decoder_batch(std::span<const TokenSequence> targets,
                                std::span<const int> to_memory);

/// Encoder + length converter + decoder. Parameters are plain arrays; the
/// forward methods add nodes to a caller-owned graph.
class InterpModel {
 public:
  InterpModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// All trainable arrays in a fixed order (checkpoint order).
  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
  long parameter_count() const;

  /// Length-converter spread, softplus of the unconstrained raw scalar.
  double sigma() const;
  ag::Parameter& sigma_raw() { return sigma_raw_; }
  const ag::Parameter& sigma_raw() const { return sigma_raw_; }
  ag::Var sigma_var(ag::Graph& g) const;

  /// Encodes a packed batch; each sequence is encoded independently.
  ag::Var encode(ag::Graph& g, std::span<const TokenSequence> xs,
                 ag::Segments* layout) const;

  /// Teacher-forced decoder logits, one row per input position.
  ag::Var decode_logits(ag::Graph& g, ag::Var memory,
                        const ag::Segments& memory_layout,
                        const DecoderBatch& batch) const;

 private:
  struct Linear {
    ag::Parameter w, b;
  };
  struct Norm {
    ag::Parameter gamma, beta;
  };
  struct EncoderLayer {
    Norm ln1, ln2;
    Linear q, k, v, o, ff1, ff2;
  };
  struct DecoderLayer {
    Norm ln1, ln2, ln3;
    Linear q, k, v, o;
    Linear cq, ck, cv, co;
    Linear ff1, ff2;
  };

  ag::Var linear(ag::Graph& g, ag::Var x, const Linear& l) const;
  ag::Var norm(ag::Graph& g, ag::Var x, const Norm& n) const;
  ag::Var embed(ag::Graph& g, std::span<const int> ids,
                const ag::Segments& layout) const;

  ModelConfig config_;
  ag::Parameter embedding_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Norm encoder_norm_, decoder_norm_;
  Linear output_;
  ag::Parameter sigma_raw_;
  ag::Matrix positions_;  // sinusoidal, (max_length + 2) x d
};

/// L~ = ceil(alpha * La + (1 - alpha) * Lb). Products within 1e-9 of an
/// integer are snapped so decimal ratios such as 0.3 give exact results.
int interp_length(int length_a, int length_b, MixRatio alpha);

/// Encodes one sequence in inference mode.
EncodedSequence encode(const InterpModel& model, const TokenSequence& x);

/// Resamples H to `target_length` rows with the location-based weights.
ag::Matrix convert_length(const EncodedSequence& h, int target_length,
                          double sigma);

/// alpha * a + (1 - alpha) * b; exact pass-through at alpha in {0, 1}.
InterpolatedState interpolate_states(const ag::Matrix& a_converted,
                                     const ag::Matrix& b_converted,
                                     MixRatio alpha, int length_a, int length_b);

/// encode -> convert_length -> interpolate_states for one pair.
InterpolatedState build_state(const InterpModel& model, const TokenSequence& a,
                              const TokenSequence& b, MixRatio alpha);

/// Log-softmax over the vocabulary at each decoder step of BOS + y; row t is
/// the distribution for target t (targets are y followed by EOS).
ag::Matrix decoder_step_logprobs(const InterpModel& model,
                                 const InterpolatedState& state,
                                 const TokenSequence& y);

/// Sum over steps of log p(target_t | prefix, state); targets are y + EOS.
double decoder_logprob(const InterpModel& model, const InterpolatedState& state,
                       const TokenSequence& y);

}  // namespace lerptext
