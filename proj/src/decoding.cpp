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

#include "lerptext/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "lerptext/hashing.hpp"
#include "lerptext/kv_config.hpp"

namespace lerptext {

using ag::Graph;
using ag::Matrix;
using ag::Var;

void DecodeConfig::validate() const {
  if (beam_size < 1) throw std::invalid_argument("beam_size must be >= 1");
  if (max_decode_length < 0) throw std::invalid_argument("max_decode_length must be >= 0");
  if (!std::isfinite(length_penalty)) throw std::invalid_argument("length_penalty must be finite");
}

std::string_view to_string(DecodeStrategy s) {
  switch (s) {
    case DecodeStrategy::kBeam: return "beam";
    case DecodeStrategy::kGreedy: return "greedy";
    case DecodeStrategy::kSample: return "sample";
  }
  return "beam";
}

void set_field(DecodeConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "strategy") {
    if (value == "beam") cfg.strategy = DecodeStrategy::kBeam;
    else if (value == "greedy") cfg.strategy = DecodeStrategy::kGreedy;
    else if (value == "sample") cfg.strategy = DecodeStrategy::kSample;
    else throw std::invalid_argument("strategy: expected beam, greedy or sample, got " +
                                     std::string(value));
  } else if (key == "beam_size") cfg.beam_size = kv::to_int(key, value);
  else if (key == "max_decode_length") cfg.max_decode_length = kv::to_int(key, value);
  else if (key == "length_penalty") cfg.length_penalty = kv::to_double(key, value);
  else if (key == "seed") cfg.seed = kv::to_u64(key, value);
  else throw std::invalid_argument("unknown decode config key: " + std::string(key));
}

std::vector<std::pair<std::string, std::string>> fields(const DecodeConfig& cfg) {
  return {{"strategy", std::string(to_string(cfg.strategy))},
          {"beam_size", std::to_string(cfg.beam_size)},
          {"max_decode_length", std::to_string(cfg.max_decode_length)},
          {"length_penalty", kv::format_double(cfg.length_penalty)},
          {"seed", std::to_string(cfg.seed)}};
}

TokenSequence DecodeResult::content() const {
  TokenSequence out;
  for (int id : tokens.ids) {
    if (!Vocabulary::is_special(id)) out.ids.push_back(id);
  }
  return out;
}

namespace {

struct Hypothesis {
  std::vector<int> ids;  // generated tokens, no BOS
  double score = 0.0;
  bool finished = false;
};

bool allowed(int id) { return id != kPadId && id != kBosId && id != kMaskId; }

// Next-token log-probabilities for every prefix, one row per prefix.
Matrix next_logprobs(const InterpModel& model, const InterpolatedState& state,
                     const std::vector<Hypothesis>& live) {
  Graph g(false);
  Var memory = g.constant(state.vectors);
  ag::Segments mem_seg = ag::Segments::from_lengths(
      std::span<const int>(&state.target_length, 1));
  DecoderBatch batch;
  std::vector<int> lengths;
  for (const auto& h : live) {
    batch.input_ids.push_back(kBosId);
    batch.input_ids.insert(batch.input_ids.end(), h.ids.begin(), h.ids.end());
    lengths.push_back(static_cast<int>(h.ids.size()) + 1);
  }
  batch.layout = ag::Segments::from_lengths(lengths);
  batch.to_memory.assign(live.size(), 0);
  Var logits = model.decode_logits(g, memory, mem_seg, batch);
  Matrix last(static_cast<Eigen::Index>(live.size()), logits.cols());
  for (int s = 0; s < batch.layout.count(); ++s) {
    last.row(s) = logits.value().row(batch.layout.offset[s] + batch.layout.length[s] - 1);
  }
  return ag::log_softmax_rows(last);
}

double ranking_score(const Hypothesis& h, double length_penalty) {
  if (length_penalty == 0.0) return h.score;
  return h.score / std::pow(static_cast<double>(std::max<size_t>(1, h.ids.size())),
                            length_penalty);
}

DecodeResult to_result(const Hypothesis& h, const InterpolatedState& state) {
  DecodeResult r;
  r.tokens.ids = h.ids;
  r.total_logprob = h.score;
  r.alpha = state.alpha.value();
  r.truncated = !h.finished;
  return r;
}

DecodeResult beam_search(const InterpModel& model, const InterpolatedState& state,
                         int max_len, int beam_size, double length_penalty) {
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  struct Candidate {
    double score;
    int token;
    int parent;
  };
  for (int t = 0; t < max_len && !live.empty(); ++t) {
    Matrix lp = next_logprobs(model, state, live);
    std::vector<Candidate> cand;
    cand.reserve(live.size() * static_cast<size_t>(lp.cols()));
    for (int b = 0; b < static_cast<int>(live.size()); ++b) {
      for (int v = 0; v < lp.cols(); ++v) {
        if (allowed(v)) cand.push_back({live[b].score + lp(b, v), v, b});
      }
    }
    const size_t keep = std::min(cand.size(), static_cast<size_t>(beam_size));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(keep), cand.end(),
                      [](const Candidate& x, const Candidate& y) {
                        if (x.score != y.score) return x.score > y.score;
                        if (x.token != y.token) return x.token < y.token;
                        return x.parent < y.parent;
                      });
    std::vector<Hypothesis> next;
    for (size_t i = 0; i < keep; ++i) {
      Hypothesis h = live[cand[i].parent];
      h.ids.push_back(cand[i].token);
      h.score = cand[i].score;
      if (cand[i].token == kEosId) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (!finished.empty() && length_penalty == 0.0) {
      // Scores only decrease with length, so no live prefix can overtake.
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_finished = std::max(best_finished, f.score);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.score);
      if (best_finished >= best_live) break;
    }
    if (static_cast<int>(finished.size()) >= beam_size) break;
  }
  const std::vector<Hypothesis>& pool = finished.empty() ? live : finished;
  const Hypothesis* best = &pool.front();
  for (const auto& h : pool) {
    if (ranking_score(h, length_penalty) > ranking_score(*best, length_penalty)) best = &h;
  }
  return to_result(*best, state);
}

DecodeResult sample(const InterpModel& model, const InterpolatedState& state,
                    int max_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Hypothesis> live{Hypothesis{}};
  for (int t = 0; t < max_len; ++t) {
    Matrix lp = next_logprobs(model, state, live);
    std::vector<double> w(static_cast<size_t>(lp.cols()));
    for (int v = 0; v < lp.cols(); ++v) w[v] = allowed(v) ? std::exp(lp(0, v)) : 0.0;
    std::discrete_distribution<int> dist(w.begin(), w.end());
    const int tok = dist(rng);
    live[0].ids.push_back(tok);
    live[0].score += lp(0, tok);
    if (tok == kEosId) {
      live[0].finished = true;
      break;
    }
  }
  return to_result(live[0], state);
}

}  // namespace

DecodeResult decode_state(const InterpModel& model, const InterpolatedState& state,
                          int max_decode_length, const DecodeConfig& cfg) {
  cfg.validate();
  if (max_decode_length < 1) throw std::invalid_argument("max_decode_length must be >= 1");
  switch (cfg.strategy) {
    case DecodeStrategy::kGreedy:
      return beam_search(model, state, max_decode_length, 1, 0.0);
    case DecodeStrategy::kSample:
      return sample(model, state, max_decode_length, cfg.seed);
    case DecodeStrategy::kBeam: {
      DecodeResult beam =
          beam_search(model, state, max_decode_length, cfg.beam_size, cfg.length_penalty);
      if (cfg.beam_size == 1 || cfg.length_penalty != 0.0) return beam;
      // Pruning can drop the greedy path; never return something worse.
      DecodeResult greedy = beam_search(model, state, max_decode_length, 1, 0.0);
      return greedy.total_logprob > beam.total_logprob ? greedy : beam;
    }
  }
  throw std::logic_error("unknown decode strategy");
}

DecodeResult interpolate_text(const InterpModel& model, const TokenSequence& a,
                              const TokenSequence& b, MixRatio alpha,
                              const DecodeConfig& cfg) {
  cfg.validate();
  if (a.empty() || b.empty()) throw std::invalid_argument("interpolate_text: empty input");
  const int max_len = cfg.max_decode_length > 0
                          ? cfg.max_decode_length
                          : 2 * std::max(a.length(), b.length()) + 2;
  InterpolatedState state = build_state(model, a, b, alpha);
  return decode_state(model, state, max_len, cfg);
}

std::vector<DecodeResult> batch_interpolate(const InterpModel& model,
                                            std::span<const InterpolationRequest> items,
                                            const DecodeConfig& cfg, int workers) {
  if (items.empty()) throw std::invalid_argument("batch_interpolate: empty request list");
  std::vector<DecodeResult> out(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  auto run_one = [&](size_t i) {
    try {
      DecodeConfig c = cfg;
      c.seed = mix_seed(cfg.seed, 7, i);
      out[i] = interpolate_text(model, items[i].a, items[i].b, MixRatio(items[i].alpha), c);
      out[i].source_a = items[i].source_a;
      out[i].source_b = items[i].source_b;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int n_workers = std::clamp(workers, 1, static_cast<int>(items.size()));
  if (n_workers == 1) {
    for (size_t i = 0; i < items.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = static_cast<size_t>(w); i < items.size(); i += static_cast<size_t>(n_workers)) {
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("batch_interpolate: item " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lerptext
