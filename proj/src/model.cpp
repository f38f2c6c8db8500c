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

#include "lerptext/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace lerptext {

using ag::Graph;
using ag::Matrix;
using ag::Parameter;
using ag::Var;

MixRatio::MixRatio(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::out_of_range("mix ratio " + std::to_string(alpha) +
                            " outside [0, 1]");
  }
}

void ModelConfig::validate() const {
  if (vocab_size <= kNumSpecialTokens) {
    throw std::invalid_argument("model vocab_size must exceed the special tokens");
  }
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
    throw std::invalid_argument("d_model must be a positive multiple of heads");
  }
  if (ff_dim <= 0 || encoder_layers < 0 || decoder_layers < 0 || max_length < 1) {
    throw std::invalid_argument("invalid model dimensions");
  }
  if (!(sigma_init > 0.0)) throw std::invalid_argument("sigma_init must be positive");
}

DecoderBatch make_decoder_batch(std::span<const TokenSequence> targets,
                                std::span<const int> to_memory) {
  if (targets.size() != to_memory.size()) {
    throw std::invalid_argument("decoder batch: memory map size mismatch");
  }
  DecoderBatch b;
  std::vector<int> lengths;
  lengths.reserve(targets.size());
  for (const auto& y : targets) {
    b.input_ids.push_back(kBosId);
    b.input_ids.insert(b.input_ids.end(), y.ids.begin(), y.ids.end());
    b.target_ids.insert(b.target_ids.end(), y.ids.begin(), y.ids.end());
    b.target_ids.push_back(kEosId);
    lengths.push_back(y.length() + 1);
  }
  b.layout = ag::Segments::from_lengths(lengths);
  b.to_memory.assign(to_memory.begin(), to_memory.end());
  return b;
}

namespace {

Matrix normal_matrix(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

double sinusoid(int pos, int col, int d) {
  const double rate = std::pow(10000.0, -static_cast<double>(2 * (col / 2)) / d);
  return col % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
}

// Inverse of softplus, so the raw parameter starts at the requested sigma.
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

InterpModel::InterpModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int d = config_.d_model;
  const int f = config_.ff_dim;
  const double residual_scale =
      1.0 / std::sqrt(2.0 * std::max(1, config_.encoder_layers + config_.decoder_layers));

  auto linear = [&](const std::string& name, int in, int out, double gain = 1.0) {
    return Linear{Parameter(name + ".w", normal_matrix(rng, in, out, gain / std::sqrt(in))),
                  Parameter(name + ".b", Matrix::Zero(1, out))};
  };
  auto norm = [&](const std::string& name) {
    return Norm{Parameter(name + ".gamma", Matrix::Ones(1, d)),
                Parameter(name + ".beta", Matrix::Zero(1, d))};
  };

  embedding_ = Parameter("embedding", normal_matrix(rng, config_.vocab_size, d, 1.0));
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    EncoderLayer layer{norm(p + ".ln1"), norm(p + ".ln2"),
                       linear(p + ".q", d, d), linear(p + ".k", d, d),
                       linear(p + ".v", d, d), linear(p + ".o", d, d, residual_scale),
                       linear(p + ".ff1", d, f), linear(p + ".ff2", f, d, residual_scale)};
    encoder_.push_back(std::move(layer));
  }
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    DecoderLayer layer{norm(p + ".ln1"), norm(p + ".ln2"), norm(p + ".ln3"),
                       linear(p + ".q", d, d), linear(p + ".k", d, d),
                       linear(p + ".v", d, d), linear(p + ".o", d, d, residual_scale),
                       linear(p + ".cq", d, d), linear(p + ".ck", d, d),
                       linear(p + ".cv", d, d), linear(p + ".co", d, d, residual_scale),
                       linear(p + ".ff1", d, f), linear(p + ".ff2", f, d, residual_scale)};
    decoder_.push_back(std::move(layer));
  }
  encoder_norm_ = norm("enc.ln");
  decoder_norm_ = norm("dec.ln");
  output_ = linear("out", d, config_.vocab_size);
  Matrix raw(1, 1);
  raw(0, 0) = softplus_inverse(config_.sigma_init);
  sigma_raw_ = Parameter("sigma_raw", raw);

  const int rows = 4 * config_.max_length + 8;
  positions_.resize(rows, d);
  for (int p = 0; p < rows; ++p) {
    for (int c = 0; c < d; ++c) positions_(p, c) = sinusoid(p, c, d);
  }
}

std::vector<Parameter*> InterpModel::parameters() {
  std::vector<Parameter*> out;
  auto lin = [&](Linear& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  };
  auto nrm = [&](Norm& n) {
    out.push_back(&n.gamma);
    out.push_back(&n.beta);
  };
  out.push_back(&embedding_);
  for (auto& l : encoder_) {
    nrm(l.ln1);
    nrm(l.ln2);
    lin(l.q), lin(l.k), lin(l.v), lin(l.o), lin(l.ff1), lin(l.ff2);
  }
  for (auto& l : decoder_) {
    nrm(l.ln1);
    nrm(l.ln2);
    nrm(l.ln3);
    lin(l.q), lin(l.k), lin(l.v), lin(l.o);
    lin(l.cq), lin(l.ck), lin(l.cv), lin(l.co);
    lin(l.ff1), lin(l.ff2);
  }
  nrm(encoder_norm_);
  nrm(decoder_norm_);
  lin(output_);
  out.push_back(&sigma_raw_);
  return out;
}

std::vector<const Parameter*> InterpModel::parameters() const {
  auto mut = const_cast<InterpModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

long InterpModel::parameter_count() const {
  long n = 0;
  for (const auto* p : parameters()) n += static_cast<long>(p->size());
  return n;
}

double InterpModel::sigma() const {
  const double z = sigma_raw_.value(0, 0);
  return z > 30.0 ? z : std::log1p(std::exp(z));
}

Var InterpModel::sigma_var(Graph& g) const { return ag::softplus(g.param(sigma_raw_)); }

Var InterpModel::linear(Graph& g, Var x, const Linear& l) const {
  return ag::add_row(ag::matmul(x, g.param(l.w)), g.param(l.b));
}

Var InterpModel::norm(Graph& g, Var x, const Norm& n) const {
  return ag::layer_norm(x, g.param(n.gamma), g.param(n.beta));
}

Var InterpModel::embed(Graph& g, std::span<const int> ids,
                       const ag::Segments& layout) const {
  Var tok = ag::embedding(g.param(embedding_), ids);
  Matrix pos(tok.rows(), config_.d_model);
  for (int s = 0; s < layout.count(); ++s) {
    for (int p = 0; p < layout.length[s]; ++p) {
      const int r = layout.offset[s] + p;
      if (p < positions_.rows()) {
        pos.row(r) = positions_.row(p);
      } else {
        for (int c = 0; c < config_.d_model; ++c) pos(r, c) = sinusoid(p, c, config_.d_model);
      }
    }
  }
  return ag::add_const(tok, pos);
}

Var InterpModel::encode(Graph& g, std::span<const TokenSequence> xs,
                        ag::Segments* layout) const {
  if (xs.empty()) throw std::invalid_argument("encode: empty batch");
  std::vector<int> ids;
  std::vector<int> lengths;
  for (const auto& x : xs) {
    if (x.empty()) throw std::invalid_argument("encode: empty sequence");
    for (int id : x.ids) {
      if (id < 0 || id >= config_.vocab_size) {
        throw std::out_of_range("encode: token id " + std::to_string(id) +
                                " outside vocabulary of size " +
                                std::to_string(config_.vocab_size));
      }
    }
    ids.insert(ids.end(), x.ids.begin(), x.ids.end());
    lengths.push_back(x.length());
  }
  ag::Segments seg = ag::Segments::from_lengths(lengths);
  std::vector<int> self_map(static_cast<size_t>(seg.count()));
  for (int i = 0; i < seg.count(); ++i) self_map[i] = i;

  Var x = embed(g, ids, seg);
  for (const auto& l : encoder_) {
    Var h = norm(g, x, l.ln1);
    Var a = ag::attention(linear(g, h, l.q), linear(g, h, l.k), linear(g, h, l.v),
                          seg, seg, self_map, config_.heads, false);
    x = ag::add(x, linear(g, a, l.o));
    h = norm(g, x, l.ln2);
    x = ag::add(x, linear(g, ag::gelu(linear(g, h, l.ff1)), l.ff2));
  }
  if (layout) *layout = std::move(seg);
  return norm(g, x, encoder_norm_);
}

Var InterpModel::decode_logits(Graph& g, Var memory,
                               const ag::Segments& memory_layout,
                               const DecoderBatch& batch) const {
  const auto& seg = batch.layout;
  std::vector<int> self_map(static_cast<size_t>(seg.count()));
  for (int i = 0; i < seg.count(); ++i) self_map[i] = i;
  for (int m : batch.to_memory) {
    if (m < 0 || m >= memory_layout.count()) {
      throw std::out_of_range("decode_logits: memory segment out of range");
    }
  }
  Var x = embed(g, batch.input_ids, seg);
  for (const auto& l : decoder_) {
    Var h = norm(g, x, l.ln1);
    Var a = ag::attention(linear(g, h, l.q), linear(g, h, l.k), linear(g, h, l.v),
                          seg, seg, self_map, config_.heads, true);
    x = ag::add(x, linear(g, a, l.o));
    h = norm(g, x, l.ln2);
    Var c = ag::attention(linear(g, h, l.cq), linear(g, memory, l.ck),
                          linear(g, memory, l.cv), seg, memory_layout,
                          batch.to_memory, config_.heads, false);
    x = ag::add(x, linear(g, c, l.co));
    h = norm(g, x, l.ln3);
    x = ag::add(x, linear(g, ag::gelu(linear(g, h, l.ff1)), l.ff2));
  }
  return linear(g, norm(g, x, decoder_norm_), output_);
}

int interp_length(int length_a, int length_b, MixRatio alpha) {
  if (length_a < 1 || length_b < 1) {
    throw std::invalid_argument("interp_length: lengths must be >= 1");
  }
  const double a = alpha.value();
  const double v = a * length_a + (1.0 - a) * length_b;
  const double nearest = std::round(v);
  int out = std::abs(v - nearest) <= 1e-9 * std::max(1.0, std::abs(v))
                ? static_cast<int>(nearest)
                : static_cast<int>(std::ceil(v));
  return std::clamp(out, std::min(length_a, length_b), std::max(length_a, length_b));
}

EncodedSequence encode(const InterpModel& model, const TokenSequence& x) {
  Graph g(false);
  Var h = model.encode(g, std::span<const TokenSequence>(&x, 1), nullptr);
  return EncodedSequence{h.value()};
}

Matrix convert_length(const EncodedSequence& h, int target_length, double sigma) {
  if (h.length() < 1) throw std::invalid_argument("convert_length: empty input");
  if (target_length < 1) throw std::invalid_argument("convert_length: target < 1");
  return ag::length_weights(h.length(), target_length, sigma) * h.vectors;
}

InterpolatedState interpolate_states(const Matrix& a_converted,
                                     const Matrix& b_converted, MixRatio alpha,
                                     int length_a, int length_b) {
  if (a_converted.rows() != b_converted.rows() ||
      a_converted.cols() != b_converted.cols()) {
    throw std::invalid_argument("interpolate_states: shape mismatch");
  }
  InterpolatedState s;
  const double w = alpha.value();
  if (w == 1.0) {
    s.vectors = a_converted;
  } else if (w == 0.0) {
    s.vectors = b_converted;
  } else {
    s.vectors = w * a_converted + (1.0 - w) * b_converted;
  }
  s.target_length = static_cast<int>(a_converted.rows());
  s.alpha = alpha;
  s.length_a = length_a;
  s.length_b = length_b;
  return s;
}

InterpolatedState build_state(const InterpModel& model, const TokenSequence& a,
                              const TokenSequence& b, MixRatio alpha) {
  const int lt = interp_length(a.length(), b.length(), alpha);
  const double sigma = model.sigma();
  return interpolate_states(convert_length(encode(model, a), lt, sigma),
                            convert_length(encode(model, b), lt, sigma), alpha,
                            a.length(), b.length());
}

Matrix decoder_step_logprobs(const InterpModel& model,
                             const InterpolatedState& state,
                             const TokenSequence& y) {
  if (y.empty()) throw std::invalid_argument("decoder_logprob: empty target");
  Graph g(false);
  Var memory = g.constant(state.vectors);
  const int zero = 0;
  ag::Segments mem_seg = ag::Segments::from_lengths(
      std::span<const int>(&state.target_length, 1));
  DecoderBatch batch = make_decoder_batch(std::span<const TokenSequence>(&y, 1),
                                          std::span<const int>(&zero, 1));
  Var logits = model.decode_logits(g, memory, mem_seg, batch);
  return ag::log_softmax_rows(logits.value());
}

double decoder_logprob(const InterpModel& model, const InterpolatedState& state,
                       const TokenSequence& y) {
  Matrix lp = decoder_step_logprobs(model, state, y);
  double total = 0.0;
  for (int t = 0; t < y.length(); ++t) total += lp(t, y.ids[t]);
  total += lp(y.length(), kEosId);
  return total;
}

}  // namespace lerptext
