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

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Tolerances and sizes are fixed here.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lerptext/augmentation.hpp"
#include "lerptext/classifier.hpp"
#include "lerptext/decoding.hpp"
#include "lerptext/evaluation.hpp"
#include "lerptext/hashing.hpp"
#include "lerptext/model.hpp"
#include "lerptext/synthetic.hpp"
#include "lerptext/training.hpp"

namespace lt = lerptext;
namespace fs = std::filesystem;

namespace {

// Pinned sizes and thresholds.
constexpr int kLengthGridMax = 64;
constexpr int kConverterTriples = 1000;
constexpr double kRowSumTol = 1e-6;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradFloor = 1e-6;  // denominator floor for near-zero gradients
constexpr int kCorpusSize = 2000;
constexpr int kTrainSteps = 2000;
constexpr int kEvalPairs = 200;
constexpr double kEndpointPrecision = 0.80;
constexpr double kRhoThreshold = 0.9;
constexpr double kRankFraction = 0.90;
constexpr int kLabelTrials = 10000;
constexpr double kSimplexTol = 1e-6;
constexpr double kOneHotTol = 1e-6;
// A label counts as non-tied when its runner-up is at most this fraction of
// its maximum; below that, power 100 pushes the runner-up under 1e-6.
constexpr double kNonTiedRatio = 0.8;
constexpr int kShots = 10;
constexpr double kNonInferiorityPoints = 2.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << "CRITERION " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
}

void info(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

std::string sci(double v) {
  std::ostringstream ss;
  ss.setf(std::ios::scientific);
  ss.precision(2);
  ss << v;
  return ss.str();
}

lt::ModelConfig toy_config(int vocab, int d, int layers) {
  lt::ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d;
  c.heads = d >= 64 ? 4 : 2;
  c.ff_dim = 4 * d;
  c.encoder_layers = layers;
  c.decoder_layers = layers;
  c.max_length = 64;
  return c;
}

lt::TokenSequence random_seq(std::mt19937_64& rng, int length, int vocab) {
  std::uniform_int_distribution<int> tok(lt::kNumSpecialTokens, vocab - 1);
  lt::TokenSequence x;
  for (int i = 0; i < length; ++i) x.ids.push_back(tok(rng));
  return x;
}

// 1. Interpolated length against integer ceiling arithmetic.
void criterion_length() {
  const auto t0 = Clock::now();
  long cases = 0;
  long mismatches = 0;
  for (int k = 0; k <= 10; ++k) {
    const lt::MixRatio alpha(k / 10.0);
    for (int la = 1; la <= kLengthGridMax; ++la) {
      for (int lb = 1; lb <= kLengthGridMax; ++lb) {
        const int num = k * la + (10 - k) * lb;
        const int expected = (num + 9) / 10;
        if (lt::interp_length(la, lb, alpha) != expected) ++mismatches;
        ++cases;
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, mismatches == 0 && secs < 1.0,
         std::to_string(mismatches) + " mismatches over " + std::to_string(cases) + " cases, " +
             fmt(secs, 3) + " s (limit 1 s)");
}

// 2. Length-converter weight rows.
void criterion_converter() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(lt::mix_seed(2026, 2));
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> log_sigma(std::log(0.05), std::log(20.0));
  double worst_sum = 0.0;
  double min_weight = 1.0;
  for (int i = 0; i < kConverterTriples; ++i) {
    const int L = len(rng), T = len(rng);
    const lt::ag::Matrix w = lt::ag::length_weights(L, T, std::exp(log_sigma(rng)));
    for (int j = 0; j < T; ++j) worst_sum = std::max(worst_sum, std::abs(w.row(j).sum() - 1.0));
    min_weight = std::min(min_weight, w.minCoeff());
  }
  int identity_failures = 0;
  for (int L = 1; L <= 64; ++L) {
    const lt::ag::Matrix w = lt::ag::length_weights(L, L, 0.05);
    for (int j = 0; j < L; ++j) {
      Eigen::Index arg = 0;
      w.row(j).maxCoeff(&arg);
      if (arg != j) ++identity_failures;
    }
  }
  const double secs = seconds_since(t0);
  report(2, worst_sum <= kRowSumTol && min_weight >= 0.0 && identity_failures == 0 && secs < 10.0,
         "max |row sum - 1| " + sci(worst_sum) + ", min weight " +
             sci(min_weight) + ", identity argmax failures " +
             std::to_string(identity_failures) + " (L = 1..64), " + fmt(secs, 2) +
             " s (limit 10 s)");
}

// 3. Full regularized loss gradient, including the spread parameter.
void criterion_gradient() {
  const auto t0 = Clock::now();
  lt::InterpModel m(toy_config(32, 8, 2), 303);
  std::mt19937_64 rng(lt::mix_seed(2026, 3));
  std::vector<lt::TokenPair> pairs;
  for (int i = 0; i < 3; ++i) {
    pairs.push_back({random_seq(rng, 2 + i * 2, 32), random_seq(rng, 6 - i, 32)});
  }
  const std::vector<double> alphas = {0.15, 0.5, 0.85};
  lt::TrainingConfig cfg;
  cfg.p_mask = 0.2;
  cfg.noise_std = 0.01;
  cfg.lambda = 0.01;
  for (auto* p : m.parameters()) p->zero_grad();
  lt::evaluate_batch(m, pairs, alphas, cfg, lt::Mode::kTrain, 11, true);
  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  long checked = 0;
  for (auto* p : m.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      const double up = lt::evaluate_batch(m, pairs, alphas, cfg, lt::Mode::kTrain, 11, false).loss;
      p->value.data()[i] = saved - h;
      const double down = lt::evaluate_batch(m, pairs, alphas, cfg, lt::Mode::kTrain, 11, false).loss;
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
      if (rel > worst) {
        worst = rel;
        worst_name = p->name;
      }
      ++checked;
    }
  }
  const double sigma_grad = m.sigma_raw().grad(0, 0);
  const double secs = seconds_since(t0);
  report(3, worst < kGradRelTol && sigma_grad != 0.0 && secs < 120.0,
         "max relative error " + sci(worst) + " (" + worst_name + ") over " +
             std::to_string(checked) + " parameters incl. spread (grad " +
             sci(sigma_grad) + "), " + fmt(secs, 1) + " s (limit 120 s)");
}

// 7. Label algebra.
void criterion_labels() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(lt::mix_seed(2026, 7));
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::uniform_int_distribution<int> classes(2, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_label = [&](int k) {
    lt::SoftLabel y;
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      y.probs.push_back(gamma(rng));
      s += y.probs.back();
    }
    for (double& p : y.probs) p /= s;
    return y;
  };
  int identity_fail = 0, simplex_fail = 0, swap_fail = 0, onehot_fail = 0, non_tied = 0;
  double worst_onehot = 0.0;
  for (int t = 0; t < kLabelTrials; ++t) {
    const int k = classes(rng);
    const lt::SoftLabel a = random_label(k), b = random_label(k);
    const double alpha = unit(rng);
    if (!(lt::sharpen(a, 1.0) == a)) ++identity_fail;
    const lt::SoftLabel ab = lt::interpolate_labels(a, b, lt::MixRatio(alpha));
    if (!lt::on_simplex(ab, kSimplexTol)) ++simplex_fail;
    if (!(ab == lt::interpolate_labels(b, a, lt::MixRatio(1.0 - alpha)))) ++swap_fail;
    // Hard labels go through the same path.
    const lt::SoftLabel hard = lt::interpolate_labels(lt::Label{t % k}, lt::Label{(t + 1) % k},
                                                      lt::MixRatio(alpha), k);
    if (!lt::on_simplex(hard, kSimplexTol)) ++simplex_fail;

    std::vector<double> sorted = a.probs;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[1] <= kNonTiedRatio * sorted[0]) {
      ++non_tied;
      const lt::SoftLabel s = lt::sharpen(a, 0.01);
      const lt::SoftLabel target = lt::one_hot(a.argmax(), k);
      double dev = 0.0;
      for (int i = 0; i < k; ++i) dev = std::max(dev, std::abs(s.probs[i] - target.probs[i]));
      worst_onehot = std::max(worst_onehot, dev);
      if (dev > kOneHotTol) ++onehot_fail;
    }
  }
  const double secs = seconds_since(t0);
  report(7,
         identity_fail == 0 && simplex_fail == 0 && swap_fail == 0 && onehot_fail == 0 &&
             non_tied > 0 && secs < 5.0,
         "sharpen(T=1) mismatches " + std::to_string(identity_fail) + ", simplex violations " +
             std::to_string(simplex_fail) + ", swap mismatches " + std::to_string(swap_fail) +
             " over " + std::to_string(kLabelTrials) + " draws; sharpen(T=0.01) max deviation " +
             sci(worst_onehot) + " on " + std::to_string(non_tied) +
             " non-tied labels (runner-up <= " + fmt(kNonTiedRatio, 2) + " x max), " +
             fmt(secs, 2) + " s (limit 5 s)");
}

struct Shared {
  lt::Vocabulary vocab{lt::Vocabulary::special_tokens()};
  std::vector<lt::TokenSequence> corpus;
  std::unique_ptr<lt::InterpModel> model;
  std::vector<lt::TokenPair> pairs;
  double train_seconds = 0.0;
};

Shared train_shared_model() {
  Shared s;
  const auto lines = lt::synthetic::review_corpus(kCorpusSize, lt::mix_seed(2026, 40));
  s.vocab = lt::build_vocabulary(lines, 8000);
  for (const auto& l : lines) s.corpus.push_back(lt::tokenize(l, s.vocab));
  s.model = std::make_unique<lt::InterpModel>(toy_config(s.vocab.size(), 128, 2), lt::mix_seed(2026, 41));
  lt::TrainingConfig cfg;
  cfg.steps = kTrainSteps;
  cfg.seed = 2026;
  lt::TrainHooks hooks;
  hooks.on_step = [&](const lt::TrainingLogRow& r) {
    if (r.step % 200 == 0) {
      info("step " + std::to_string(r.step) + " loss " + fmt(r.loss) + " recon_a " + fmt(r.recon_a) +
           " recon_b " + fmt(r.recon_b));
    }
  };
  info("training d128 2+2 model on " + std::to_string(s.corpus.size()) + " sentences, vocabulary " +
       std::to_string(s.vocab.size()) + ", " + std::to_string(cfg.steps) + " steps");
  const auto t0 = Clock::now();
  lt::train(*s.model, s.corpus, cfg, hooks);
  s.train_seconds = seconds_since(t0);
  info("training took " + fmt(s.train_seconds, 1) + " s, sigma " + fmt(s.model->sigma()));

  // Held-in pairs of distinct sentences.
  std::mt19937_64 rng(lt::mix_seed(2026, 42));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(s.corpus.size()) - 1);
  while (static_cast<int>(s.pairs.size()) < kEvalPairs) {
    const int i = pick(rng), j = pick(rng);
    if (s.corpus[i] == s.corpus[j]) continue;
    s.pairs.push_back({s.corpus[i], s.corpus[j]});
  }
  return s;
}

// 4 and 5. Endpoint reconstruction and sweep trend.
void criteria_sweep(const Shared& s) {
  const auto t0 = Clock::now();
  lt::DecodeConfig beam;  // beam 4
  const std::vector<double> endpoints = {0.05, 0.95};
  const lt::PrecisionCurve ends = lt::alpha_sweep(*s.model, s.pairs, endpoints, beam);
  const double prec_a = ends.mean_precision_a[1];
  const double prec_b = ends.mean_precision_b[0];
  const double train_minutes = s.train_seconds / 60.0;
  report(4, prec_a >= kEndpointPrecision && prec_b >= kEndpointPrecision && train_minutes <= 30.0,
         "precision vs x^a at 0.95 = " + fmt(prec_a) + ", vs x^b at 0.05 = " + fmt(prec_b) +
             " (threshold " + fmt(kEndpointPrecision, 2) + ", " + std::to_string(s.pairs.size()) +
             " pairs, beam 4); training " + fmt(train_minutes, 1) + " min (limit 30)");

  std::vector<double> grid;
  for (int k = 1; k <= 9; ++k) grid.push_back(k / 10.0);
  const lt::PrecisionCurve curve = lt::alpha_sweep(*s.model, s.pairs, grid, beam);
  const lt::Monotonicity mono = lt::monotonicity_score(curve);
  std::ostringstream trace;
  for (size_t i = 0; i < curve.alphas.size(); ++i) {
    trace << (i ? " " : "") << fmt(curve.alphas[i], 1) << ":" << fmt(curve.mean_precision_a[i], 2)
          << "/" << fmt(curve.mean_precision_b[i], 2);
  }
  info("sweep alpha:prec_a/prec_b " + trace.str());
  report(5, mono.rho_a >= kRhoThreshold && mono.rho_b <= -kRhoThreshold,
         "rho_a = " + fmt(mono.rho_a) + ", rho_b = " + fmt(mono.rho_b) + " over 9 points x " +
             std::to_string(curve.n_pairs) + " pairs (thresholds +/-" + fmt(kRhoThreshold, 1) +
             "), " + fmt(seconds_since(t0), 1) + " s");
}

// 6. Decoder ranks the dominant source higher.
void criterion_ranking(const Shared& s) {
  int high = 0, low = 0, both = 0;
  for (const auto& p : s.pairs) {
    const auto st9 = lt::build_state(*s.model, p.a, p.b, lt::MixRatio(0.9));
    const auto st1 = lt::build_state(*s.model, p.a, p.b, lt::MixRatio(0.1));
    const bool a_wins = lt::decoder_logprob(*s.model, st9, p.a) > lt::decoder_logprob(*s.model, st9, p.b);
    const bool b_wins = lt::decoder_logprob(*s.model, st1, p.b) > lt::decoder_logprob(*s.model, st1, p.a);
    high += a_wins;
    low += b_wins;
    both += a_wins && b_wins;
  }
  const double n = static_cast<double>(s.pairs.size());
  report(6, both / n >= kRankFraction,
         "both conditions hold on " + fmt(both / n, 3) + " of " + std::to_string(s.pairs.size()) +
             " pairs (x^a preferred at 0.9: " + fmt(high / n, 3) + ", x^b preferred at 0.1: " +
             fmt(low / n, 3) + "; threshold " + fmt(kRankFraction, 2) + ")");
}

lt::Dataset task_dataset(const lt::Vocabulary& vocab, int count, std::uint64_t seed) {
  lt::Dataset d;
  d.num_classes = 2;
  for (const auto& row : lt::synthetic::sentiment_task(count, seed)) {
    lt::LabeledExample ex;
    ex.texts.push_back(lt::tokenize(row.text, vocab));
    ex.label = row.label;
    d.examples.push_back(std::move(ex));
  }
  return d;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. Augmentation parity, schema and byte-identical reruns.
void criterion_parity(const Shared& s, const fs::path& work) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream detail;
  for (int n : {10, 100, 1000}) {
    const lt::Dataset data = task_dataset(s.vocab, n, lt::mix_seed(2026, 80, n));
    lt::AugmentOptions opts;
    opts.seed = 2026;
    lt::DecodeConfig dc;
    const auto first = lt::augment_dataset(data, *s.model, s.vocab, lt::LabelPolicy{}, dc, opts);
    const auto second = lt::augment_dataset(data, *s.model, s.vocab, lt::LabelPolicy{}, dc, opts);
    const fs::path p1 = work / ("aug_" + std::to_string(n) + "_a.jsonl");
    const fs::path p2 = work / ("aug_" + std::to_string(n) + "_b.jsonl");
    lt::write_augmented_jsonl(p1, first, s.vocab, lt::TaskKind::kSingleSentence);
    lt::write_augmented_jsonl(p2, second, s.vocab, lt::TaskKind::kSingleSentence);
    bool schema = true;
    size_t read_back = 0;
    try {
      const auto rows = lt::read_augmented_jsonl(p1, s.vocab, lt::TaskKind::kSingleSentence);
      read_back = rows.size();
      for (const auto& r : rows) {
        schema = schema && r.texts.size() == 1 && r.soft_label.num_classes() == 2 &&
                 r.source_a >= 0 && r.source_a < n && r.source_b >= 0 && r.source_b < n;
      }
    } catch (const std::exception& e) {
      info(std::string("schema check failed: ") + e.what());
      schema = false;
    }
    const bool identical = file_bytes(p1) == file_bytes(p2);
    const bool count_ok = static_cast<int>(first.size()) == n && static_cast<int>(read_back) == n;
    ok = ok && schema && identical && count_ok;
    detail << "n=" << n << ": " << first.size() << " records, schema " << (schema ? "ok" : "BAD")
           << ", rerun " << (identical ? "identical" : "DIFFERS") << "; ";
  }
  detail << fmt(seconds_since(t0), 1) << " s";
  report(8, ok, detail.str());
}

// 9. Few-shot non-inferiority.
void criterion_downstream(const Shared& s) {
  const auto t0 = Clock::now();
  const lt::Dataset train = task_dataset(s.vocab, kCorpusSize, lt::mix_seed(2026, 90));
  const lt::Dataset test = task_dataset(s.vocab, 400, lt::mix_seed(2026, 91));
  lt::ExperimentConfig cfg;
  cfg.shots = kShots;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.methods = {lt::MethodSpec::parse("vanilla"), lt::MethodSpec::parse("linda")};
  const lt::ExperimentResult r = lt::experiment_suite(train, test, s.model.get(), s.vocab, cfg);
  double vanilla = 0.0, linda = 0.0, sd_v = 0.0, sd_l = 0.0;
  for (const auto& row : r.summary) {
    if (row.method == "vanilla") {
      vanilla = row.mean;
      sd_v = row.stddev;
    } else {
      linda = row.mean;
      sd_l = row.stddev;
    }
  }
  const double secs = seconds_since(t0);
  report(9, linda * 100.0 >= vanilla * 100.0 - kNonInferiorityPoints && secs < 900.0,
         "10-shot accuracy over 5 seeds: vanilla " + fmt(100 * vanilla, 1) + " +/- " +
             fmt(100 * sd_v, 1) + ", linda " + fmt(100 * linda, 1) + " +/- " + fmt(100 * sd_l, 1) +
             " (floor vanilla - " + fmt(kNonInferiorityPoints, 0) + " points), " + fmt(secs, 1) +
             " s (limit 900 s)");
}

int shell(const std::string& cmd) {
  info("$ " + cmd);
  const int status = std::system((cmd + " >/dev/null 2>>" + (fs::temp_directory_path() / "lerptext_acceptance_cli.log").string()).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 10. Command-line pipeline.
void criterion_pipeline(const fs::path& work) {
  const auto t0 = Clock::now();
  const std::string cli = LERPTEXT_CLI;
  const std::string d = (work / "pipeline").string();
  fs::remove_all(d);
  std::vector<std::pair<std::string, int>> steps;
  auto run = [&](const std::string& name, const std::string& args) {
    steps.emplace_back(name, shell(cli + " " + args));
  };
  run("synth", "synth --out " + d + "/data --count 2000 --test-count 400");
  run("train", "train --corpus " + d + "/data/corpus.txt --out " + d + "/run --steps 600 --d-model 64");
  run("sweep", "sweep --ckpt " + d + "/run/model.ckpt --corpus " + d + "/data/corpus.txt --out " + d +
                   "/sweep --pairs 50");
  run("augment", "augment --data " + d + "/data/train.jsonl --ckpt " + d + "/run/model.ckpt --out " + d +
                     "/augmented.jsonl");
  run("experiment", "experiment --data " + d + "/data/train.jsonl --test " + d +
                        "/data/test.jsonl --ckpt " + d + "/run/model.ckpt --out " + d +
                        "/experiment --seeds 1,2");
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, code] : steps) {
    detail << name << "=" << code << " ";
    ok = ok && code == 0;
  }
  const std::vector<std::string> expected = {"run/model.ckpt",      "run/manifest.json",
                                             "sweep/sweep.csv",     "sweep/sweep.svg",
                                             "sweep/manifest.json", "augmented.jsonl",
                                             "augmented.jsonl.manifest.json",
                                             "experiment/results.csv", "experiment/manifest.json"};
  int missing = 0;
  for (const auto& f : expected) {
    if (!fs::exists(fs::path(d) / f) || fs::file_size(fs::path(d) / f) == 0) {
      ++missing;
      detail << "missing " << f << " ";
    }
  }
  const double secs = seconds_since(t0);
  report(10, ok && missing == 0 && secs < 3600.0,
         "exit codes " + detail.str() + "; " + std::to_string(expected.size() - missing) + "/" +
             std::to_string(expected.size()) + " artifacts, " + fmt(secs, 1) + " s (limit 3600 s)");
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "lerptext_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const auto t0 = Clock::now();

  criterion_length();
  criterion_converter();
  criterion_gradient();
  Shared shared = train_shared_model();
  criteria_sweep(shared);
  criterion_ranking(shared);
  criterion_labels();
  criterion_parity(shared, work);
  criterion_downstream(shared);
  criterion_pipeline(work);

  std::cout << "SUMMARY: " << (10 - failures) << "/10 criteria passed in " << fmt(seconds_since(t0), 1)
            << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
