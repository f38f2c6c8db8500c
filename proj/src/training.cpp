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

#include "lerptext/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lerptext/hashing.hpp"
#include "lerptext/kv_config.hpp"

namespace lerptext {

using ag::Graph;
using ag::Matrix;
using ag::Var;

TrainingConfig TrainingConfig::finetune_preset() {
  TrainingConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-5;
  cfg.warmup_steps = 0;
  cfg.adam_beta2 = 0.999;
  cfg.adam_eps = 1e-8;
  return cfg;
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (!(p_mask >= 0.0 && p_mask < 1.0)) throw std::invalid_argument("p_mask must be in [0, 1)");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
}

void set_field(TrainingConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "batch_size") cfg.batch_size = kv::to_int(key, value);
  else if (key == "learning_rate") cfg.learning_rate = kv::to_double(key, value);
  else if (key == "steps") cfg.steps = kv::to_int(key, value);
  else if (key == "p_mask") cfg.p_mask = kv::to_double(key, value);
  else if (key == "lambda") cfg.lambda = kv::to_double(key, value);
  else if (key == "noise_std") cfg.noise_std = kv::to_double(key, value);
  else if (key == "seed") cfg.seed = kv::to_u64(key, value);
  else if (key == "alpha_sampling") {
    if (value == "per-example") cfg.alpha_sampling = AlphaSampling::kPerExample;
    else if (value == "per-minibatch") cfg.alpha_sampling = AlphaSampling::kPerMinibatch;
    else throw std::invalid_argument("alpha_sampling: expected per-example or per-minibatch, got " +
                                     std::string(value));
  } else if (key == "warmup_steps") cfg.warmup_steps = kv::to_int(key, value);
  else if (key == "grad_clip") cfg.grad_clip = kv::to_double(key, value);
  else if (key == "adam_beta1") cfg.adam_beta1 = kv::to_double(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = kv::to_double(key, value);
  else if (key == "adam_eps") cfg.adam_eps = kv::to_double(key, value);
  else if (key == "checkpoint_every") cfg.checkpoint_every = kv::to_int(key, value);
  else throw std::invalid_argument("unknown training config key: " + std::string(key));
}

std::vector<std::pair<std::string, std::string>> fields(const TrainingConfig& cfg) {
  return {
      {"batch_size", std::to_string(cfg.batch_size)},
      {"learning_rate", kv::format_double(cfg.learning_rate)},
      {"steps", std::to_string(cfg.steps)},
      {"p_mask", kv::format_double(cfg.p_mask)},
      {"lambda", kv::format_double(cfg.lambda)},
      {"noise_std", kv::format_double(cfg.noise_std)},
      {"seed", std::to_string(cfg.seed)},
      {"alpha_sampling",
       cfg.alpha_sampling == AlphaSampling::kPerExample ? "per-example" : "per-minibatch"},
      {"warmup_steps", std::to_string(cfg.warmup_steps)},
      {"grad_clip", kv::format_double(cfg.grad_clip)},
      {"adam_beta1", kv::format_double(cfg.adam_beta1)},
      {"adam_beta2", kv::format_double(cfg.adam_beta2)},
      {"adam_eps", kv::format_double(cfg.adam_eps)},
      {"checkpoint_every", std::to_string(cfg.checkpoint_every)},
  };
}

TrainingConfig parse_training_config(std::string_view text) {
  TrainingConfig cfg;
  for (const auto& [k, v] : kv::parse(text)) set_field(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string to_text(const TrainingConfig& cfg) { return kv::render(fields(cfg)); }

TokenSequence mask_tokens(const TokenSequence& x, double p_mask, std::mt19937_64& rng) {
  if (!(p_mask >= 0.0 && p_mask < 1.0)) {
    throw std::invalid_argument("p_mask must be in [0, 1)");
  }
  TokenSequence out = x;
  if (p_mask == 0.0) return out;
  std::bernoulli_distribution coin(p_mask);
  for (int& id : out.ids) {
    if (coin(rng)) id = kMaskId;
  }
  return out;
}

LindaForward linda_batch_loss(Graph& g, const InterpModel& model,
                              std::span<const TokenPair> pairs,
                              std::span<const double> alphas,
                              const TrainingConfig& cfg, Mode mode,
                              std::uint64_t seed) {
  const int m_count = static_cast<int>(pairs.size());
  if (m_count == 0) throw std::invalid_argument("empty batch");
  if (alphas.size() != pairs.size()) {
    throw std::invalid_argument("linda_batch_loss: alpha count differs from pair count");
  }
  for (double a : alphas) (void)MixRatio(a);

  const bool train = mode == Mode::kTrain;
  // One stream per (example, side) so results do not depend on batch order.
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(2 * pairs.size());
  for (int side = 0; side < 2; ++side) {
    for (int m = 0; m < m_count; ++m) rngs.emplace_back(mix_seed(seed, m, side));
  }

  std::vector<TokenSequence> inputs;
  inputs.reserve(2 * pairs.size());
  for (int side = 0; side < 2; ++side) {
    for (int m = 0; m < m_count; ++m) {
      const TokenSequence& x = side == 0 ? pairs[m].a : pairs[m].b;
      auto& rng = rngs[side * m_count + m];
      inputs.push_back(train && cfg.p_mask > 0.0 ? mask_tokens(x, cfg.p_mask, rng) : x);
    }
  }

  ag::Segments layout;
  Var h = model.encode(g, inputs, &layout);
  LindaForward out;
  out.encoder_outputs = h;
  out.max_abs_h = h.value().cwiseAbs().maxCoeff();

  Var noisy = h;
  if (train && cfg.noise_std > 0.0) {
    Matrix noise(h.rows(), h.cols());
    std::normal_distribution<double> gauss(0.0, cfg.noise_std);
    for (int s = 0; s < layout.count(); ++s) {
      auto& rng = rngs[s];
      auto block = noise.middleRows(layout.offset[s], layout.length[s]);
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = gauss(rng);
      }
    }
    noisy = ag::add_const(h, noise);
  }

  std::vector<int> len_a(m_count), len_b(m_count), target(m_count);
  for (int m = 0; m < m_count; ++m) {
    len_a[m] = pairs[m].a.length();
    len_b[m] = pairs[m].b.length();
    target[m] = interp_length(len_a[m], len_b[m], MixRatio(alphas[m]));
  }
  const int rows_a = layout.offset[m_count];
  Var ha = ag::slice_rows(noisy, 0, rows_a);
  Var hb = ag::slice_rows(noisy, rows_a, static_cast<int>(h.rows()) - rows_a);
  Var sigma = model.sigma_var(g);
  Var ca = ag::length_convert(ha, sigma, ag::Segments::from_lengths(len_a), target);
  Var cb = ag::length_convert(hb, sigma, ag::Segments::from_lengths(len_b), target);

  std::vector<double> coef;
  for (int m = 0; m < m_count; ++m) coef.insert(coef.end(), target[m], alphas[m]);
  Var state = ag::mix_rows(ca, cb, coef);
  ag::Segments memory_layout = ag::Segments::from_lengths(target);

  std::vector<TokenSequence> targets;
  std::vector<int> to_memory;
  for (int side = 0; side < 2; ++side) {
    for (int m = 0; m < m_count; ++m) {
      targets.push_back(side == 0 ? pairs[m].a : pairs[m].b);
      to_memory.push_back(m);
    }
  }
  DecoderBatch batch = make_decoder_batch(targets, to_memory);
  Var logits = model.decode_logits(g, state, memory_layout, batch);

  std::vector<double> weights(batch.target_ids.size());
  const double inv_m = 1.0 / m_count;
  for (int s = 0; s < batch.layout.count(); ++s) {
    const int m = s % m_count;
    const double w = (s < m_count ? alphas[m] : 1.0 - alphas[m]) * inv_m;
    std::fill_n(weights.begin() + batch.layout.offset[s], batch.layout.length[s], w);
  }
  std::vector<double> row_lp;
  out.loss = ag::weighted_nll(logits, batch.target_ids, weights, &row_lp);
  out.logp_a.assign(m_count, 0.0);
  out.logp_b.assign(m_count, 0.0);
  for (int s = 0; s < batch.layout.count(); ++s) {
    double sum = 0.0;
    for (int r = 0; r < batch.layout.length[s]; ++r) sum += row_lp[batch.layout.offset[s] + r];
    (s < m_count ? out.logp_a : out.logp_b)[s % m_count] = sum;
  }
  return out;
}

Var regularized_loss(Var batch_loss, Var encoder_outputs, double lambda,
                     int batch_size) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (lambda == 0.0) return batch_loss;
  return ag::add(batch_loss, ag::sum_squares(encoder_outputs, lambda / batch_size));
}

double regularized_loss(double batch_loss,
                        std::span<const EncodedSequence> encoder_outputs,
                        double lambda, int batch_size) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (lambda == 0.0) return batch_loss;
  double sq = 0.0;
  for (const auto& h : encoder_outputs) sq += h.vectors.squaredNorm();
  return batch_loss + lambda / batch_size * sq;
}

StepStats evaluate_batch(InterpModel& model, std::span<const TokenPair> pairs,
                         std::span<const double> alphas,
                         const TrainingConfig& cfg, Mode mode,
                         std::uint64_t seed, bool with_grad) {
  Graph g(with_grad);
  LindaForward fwd = linda_batch_loss(g, model, pairs, alphas, cfg, mode, seed);
  const int m = static_cast<int>(pairs.size());
  Var total = regularized_loss(fwd.loss, fwd.encoder_outputs, cfg.lambda, m);
  StepStats st;
  st.linda = fwd.loss.scalar();
  st.loss = total.scalar();
  st.penalty = st.loss - st.linda;
  st.max_abs_h = fwd.max_abs_h;
  for (int i = 0; i < m; ++i) {
    st.recon_a -= fwd.logp_a[i] / m;
    st.recon_b -= fwd.logp_b[i] / m;
    st.alpha_mean += alphas[i] / m;
  }
  if (with_grad && std::isfinite(st.loss)) g.backward(total);
  return st;
}

void write_training_log(const std::filesystem::path& path,
                        std::span<const TrainingLogRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,loss,recon_a,recon_b,penalty,alpha_mean\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.step << ',' << r.loss << ',' << r.recon_a << ',' << r.recon_b << ','
        << r.penalty << ',' << r.alpha_mean << '\n';
  }
}

AdamOptimizer::AdamOptimizer(std::vector<ag::Parameter*> params,
                             const TrainingConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

double AdamOptimizer::step() {
  ++t_;
  double sq = 0.0;
  for (auto* p : params_) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  const double clip =
      cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;
  double lr = cfg_.learning_rate;
  if (cfg_.warmup_steps > 0 && t_ <= cfg_.warmup_steps) {
    lr *= static_cast<double>(t_) / cfg_.warmup_steps;
  }
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    const auto g = (clip * p->grad.array()).eval();
    m_[i].array() = b1 * m_[i].array() + (1.0 - b1) * g;
    v_[i].array() = b2 * v_[i].array() + (1.0 - b2) * g.square();
    p->value.array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.adam_eps);
    p->zero_grad();
  }
  return norm;
}

PairSampler::PairSampler(int corpus_size, std::uint64_t seed)
    : n_(corpus_size), rng_(seed) {
  if (n_ < 1) throw std::invalid_argument("PairSampler: empty corpus");
  reshuffle();
}

void PairSampler::reshuffle() {
  first_.resize(static_cast<size_t>(n_));
  std::iota(first_.begin(), first_.end(), 0);
  second_ = first_;
  std::shuffle(first_.begin(), first_.end(), rng_);
  std::shuffle(second_.begin(), second_.end(), rng_);
  pos_ = 0;
}

std::pair<int, int> PairSampler::next() {
  if (pos_ == first_.size()) reshuffle();
  const auto p = std::make_pair(first_[pos_], second_[pos_]);
  ++pos_;
  return p;
}

std::vector<TrainingLogRow> train(InterpModel& model,
                                  std::span<const TokenSequence> corpus,
                                  const TrainingConfig& cfg,
                                  const TrainHooks& hooks) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  for (const auto& x : corpus) {
    if (x.empty()) throw std::invalid_argument("corpus contains an empty sequence");
  }

  AdamOptimizer opt(model.parameters(), cfg);
  for (auto* p : model.parameters()) p->zero_grad();
  PairSampler sampler(static_cast<int>(corpus.size()), mix_seed(cfg.seed, 1));
  std::vector<TrainingLogRow> log;
  log.reserve(static_cast<size_t>(cfg.steps));

  std::vector<TokenPair> pairs(static_cast<size_t>(cfg.batch_size));
  std::vector<double> alphas(static_cast<size_t>(cfg.batch_size));
  for (long step = 1; step <= cfg.steps; ++step) {
    std::mt19937_64 alpha_rng(mix_seed(cfg.seed, 2, static_cast<std::uint64_t>(step)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double shared = unif(alpha_rng);
    for (int m = 0; m < cfg.batch_size; ++m) {
      const auto [ia, ib] = sampler.next();
      pairs[m] = TokenPair{corpus[ia], corpus[ib]};
      alphas[m] = cfg.alpha_sampling == AlphaSampling::kPerMinibatch
                      ? shared
                      : (m == 0 ? shared : unif(alpha_rng));
    }
    StepStats st = evaluate_batch(model, pairs, alphas, cfg, Mode::kTrain,
                                  mix_seed(cfg.seed, 3, static_cast<std::uint64_t>(step)),
                                  true);
    if (!std::isfinite(st.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << "; alphas [";
      for (size_t i = 0; i < alphas.size(); ++i) msg << (i ? ", " : "") << alphas[i];
      msg << "]; max |h| = " << st.max_abs_h;
      for (auto* p : model.parameters()) p->zero_grad();
      throw TrainingError(msg.str());
    }
    opt.step();
    TrainingLogRow row{step, st.loss, st.recon_a, st.recon_b, st.penalty, st.alpha_mean};
    log.push_back(row);
    if (hooks.on_step) hooks.on_step(row);
    if (hooks.checkpoint &&
        ((cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) ||
         step == cfg.steps)) {
      hooks.checkpoint(step, model);
    }
  }
  return log;
}

}  // namespace lerptext
