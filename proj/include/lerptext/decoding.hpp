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
#include <string_view>
#include <utility>
#include <vector>

#include "lerptext/corpus.hpp"
#include "lerptext/model.hpp"

namespace lerptext {

enum class DecodeStrategy { kBeam, kGreedy, kSample };

struct DecodeConfig {
  DecodeStrategy strategy = DecodeStrategy::kBeam;
  int beam_size = 4;
  /// 0 selects 2 * max(La, Lb) + 2 per call.
  int max_decode_length = 0;
  /// Finished hypotheses are ranked by logprob / length^length_penalty.
  double length_penalty = 0.0;
  std::uint64_t seed = 0;  // sampling only

  void validate() const;
  bool operator==(const DecodeConfig&) const = default;
};

void set_field(DecodeConfig& cfg, std::string_view key, std::string_view value);
std::vector<std::pair<std::string, std::string>> fields(const DecodeConfig& cfg);
std::string_view to_string(DecodeStrategy s);

struct DecodeResult {
  /// Generated ids; ends with EOS unless the length bound was hit.
  TokenSequence tokens;
  double total_logprob = 0.0;
  double alpha = 0.0;
  int source_a = -1;
  int source_b = -1;
  bool truncated = false;

  /// Tokens without EOS or other specials.
  TokenSequence content() const;
};

/// encode -> convert to the interpolated length -> mix -> decode.
/// Beam and greedy are deterministic; score ties go to the lower token id.
DecodeResult interpolate_text(const InterpModel& model, const TokenSequence& a,
                              const TokenSequence& b, MixRatio alpha,
                              const DecodeConfig& cfg);

/// Decodes from an already-built state.
DecodeResult decode_state(const InterpModel& model, const InterpolatedState& state,
                          int max_decode_length, const DecodeConfig& cfg);

struct InterpolationRequest {
  TokenSequence a;
  TokenSequence b;
  double alpha = 0.5;
  int source_a = -1;
  int source_b = -1;
};

/// Element-wise interpolate_text, order preserved. Sampling seeds are
/// derived from (cfg.seed, index), so `workers` never changes results.
std::vector<DecodeResult> batch_interpolate(const InterpModel& model,
                                            std::span<const InterpolationRequest> items,
                                            const DecodeConfig& cfg, int workers = 1);

}  // namespace lerptext
