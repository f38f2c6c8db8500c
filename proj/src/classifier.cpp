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

#include "lerptext/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lerptext/hashing.hpp"
#include "lerptext/training.hpp"

namespace lerptext {

using ag::Graph;
using ag::Matrix;
using ag::Parameter;
using ag::Var;

void ClassifierConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("classifier dims must be >= 1");
  if (epochs < 0) throw std::invalid_argument("classifier epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("classifier batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("classifier learning_rate must be positive");
}

namespace {

Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

ClassifierModel::ClassifierModel(const Vocabulary& vocab, int num_classes,
                                 int texts_per_example, const ClassifierConfig& config)
    : num_classes_(num_classes),
      texts_per_example_(texts_per_example),
      vocab_hash_(vocab.hash()) {
  config.validate();
  if (num_classes < 2) throw std::invalid_argument("classifier needs >= 2 classes");
  if (texts_per_example < 1 || texts_per_example > 2) {
    throw std::invalid_argument("classifier takes one or two texts per example");
  }
  std::mt19937_64 rng(mix_seed(config.seed, 101));
  const int d = config.embed_dim;
  const int in = d * texts_per_example;
  embedding_ = Parameter("clf.embedding", gaussian(rng, vocab.size(), d, 1.0));
  hidden_w_ = Parameter("clf.hidden.w", gaussian(rng, in, config.hidden_dim, 1.0 / std::sqrt(in)));
  hidden_b_ = Parameter("clf.hidden.b", Matrix::Zero(1, config.hidden_dim));
  out_w_ = Parameter("clf.out.w",
                     gaussian(rng, config.hidden_dim, num_classes, 1.0 / std::sqrt(config.hidden_dim)));
  out_b_ = Parameter("clf.out.b", Matrix::Zero(1, num_classes));
}

std::vector<Parameter*> ClassifierModel::parameters() {
  return {&embedding_, &hidden_w_, &hidden_b_, &out_w_, &out_b_};
}

Var ClassifierModel::logits(Graph& g, std::span<const std::vector<TokenSequence>> inputs) const {
  if (inputs.empty()) throw std::invalid_argument("classifier: empty batch");
  std::vector<Var> pooled;
  for (int t = 0; t < texts_per_example_; ++t) {
    std::vector<int> ids;
    std::vector<int> lengths;
    for (const auto& ex : inputs) {
      if (static_cast<int>(ex.size()) != texts_per_example_) {
        throw std::invalid_argument("classifier: expected " + std::to_string(texts_per_example_) +
                                    " texts per example");
      }
      const TokenSequence& x = ex[t];
      // An empty generation is read as a lone PAD token.
      if (x.empty()) {
        ids.push_back(kPadId);
        lengths.push_back(1);
        continue;
      }
      ids.insert(ids.end(), x.ids.begin(), x.ids.end());
      lengths.push_back(x.length());
    }
    Var emb = ag::embedding(g.param(embedding_), ids);
    pooled.push_back(ag::segment_mean(emb, ag::Segments::from_lengths(lengths)));
  }
  Var features = pooled.size() == 1 ? pooled.front() : ag::concat_cols(pooled);
  Var h = ag::gelu(ag::add_row(ag::matmul(features, g.param(hidden_w_)), g.param(hidden_b_)));
  return ag::add_row(ag::matmul(h, g.param(out_w_)), g.param(out_b_));
}

SoftLabel ClassifierModel::predict(const std::vector<TokenSequence>& texts) const {
  Graph g(false);
  Var z = logits(g, std::span<const std::vector<TokenSequence>>(&texts, 1));
  Matrix lp = ag::log_softmax_rows(z.value());
  SoftLabel y;
  y.probs.resize(static_cast<size_t>(num_classes_));
  for (int c = 0; c < num_classes_; ++c) y.probs[c] = std::exp(lp(0, c));
  return y;
}

int ClassifierModel::predict_class(const std::vector<TokenSequence>& texts) const {
  return predict(texts).argmax();
}

ClassifierModel train_classifier(std::span<const SoftExample> data, const Vocabulary& vocab,
                                 int num_classes, const ClassifierConfig& config,
                                 std::vector<double>* loss_log) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train_classifier: empty training set");
  const int texts = static_cast<int>(data.front().texts.size());
  for (const auto& ex : data) {
    if (ex.target.num_classes() != num_classes) {
      throw std::invalid_argument("train_classifier: inconsistent num_classes");
    }
    if (static_cast<int>(ex.texts.size()) != texts) {
      throw std::invalid_argument("train_classifier: mixed single/pair examples");
    }
  }
  ClassifierModel model(vocab, num_classes, texts, config);
  TrainingConfig opt_cfg;
  opt_cfg.learning_rate = config.learning_rate;
  opt_cfg.warmup_steps = 0;
  opt_cfg.grad_clip = 0.0;
  opt_cfg.adam_beta2 = 0.999;
  opt_cfg.adam_eps = 1e-8;
  AdamOptimizer opt(model.parameters(), opt_cfg);

  std::mt19937_64 rng(mix_seed(config.seed, 102));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<std::vector<TokenSequence>> inputs;
      Matrix target(static_cast<Eigen::Index>(end - start), num_classes);
      for (size_t i = start; i < end; ++i) {
        const auto& ex = data[order[i]];
        inputs.push_back(ex.texts);
        for (int c = 0; c < num_classes; ++c) {
          target(static_cast<Eigen::Index>(i - start), c) = ex.target.probs[c];
        }
      }
      Graph g(true);
      Var z = model.logits(g, inputs);
      std::vector<double> w(end - start, 1.0 / static_cast<double>(end - start));
      Var loss = ag::soft_cross_entropy(z, target, w);
      if (!std::isfinite(loss.scalar())) {
        std::ostringstream msg;
        msg << "classifier loss is non-finite at epoch " << epoch << ", batch starting "
            << start;
        throw TrainingError(msg.str());
      }
      if (loss_log) loss_log->push_back(loss.scalar());
      g.backward(loss);
      opt.step();
    }
  }
  return model;
}

ClassifierEval evaluate_classifier(const ClassifierModel& model, const Dataset& test) {
  if (test.examples.empty()) throw std::invalid_argument("evaluate_classifier: empty test set");
  ClassifierEval ev;
  ev.correct_per_class.assign(static_cast<size_t>(model.num_classes()), 0);
  ev.total_per_class.assign(static_cast<size_t>(model.num_classes()), 0);
  int correct = 0;
  for (const auto& ex : test.examples) {
    const int* gold = std::get_if<int>(&ex.label);
    if (!gold) throw std::invalid_argument("evaluate_classifier: test labels must be hard");
    if (*gold < 0 || *gold >= model.num_classes()) {
      throw std::out_of_range("evaluate_classifier: label outside classifier classes");
    }
    ev.total_per_class[*gold] += 1;
    if (model.predict_class(ex.texts) == *gold) {
      ++correct;
      ev.correct_per_class[*gold] += 1;
    }
  }
  ev.accuracy = static_cast<double>(correct) / test.size();
  return ev;
}

std::vector<SoftExample> to_soft_examples(const Dataset& data) {
  std::vector<SoftExample> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) {
    out.push_back(SoftExample{ex.texts, to_soft(ex.label, data.num_classes)});
  }
  return out;
}

}  // namespace lerptext
