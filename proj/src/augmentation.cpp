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

#include "lerptext/augmentation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "lerptext/classifier.hpp"
#include "lerptext/hashing.hpp"
#include "lerptext/kv_config.hpp"

namespace lerptext {

void LabelPolicy::validate() const {
  if (kind == LabelPolicyKind::kSharpened && !(temperature > 0.0 && std::isfinite(temperature))) {
    throw std::invalid_argument("sharpening temperature must be positive, got " +
                                kv::format_double(temperature));
  }
  if (kind == LabelPolicyKind::kTeacher && teacher == nullptr) {
    throw std::invalid_argument("teacher policy requires a teacher classifier");
  }
}

std::string_view to_string(LabelPolicyKind kind) {
  switch (kind) {
    case LabelPolicyKind::kInterpolated: return "interpolated";
    case LabelPolicyKind::kSharpened: return "sharpened";
    case LabelPolicyKind::kTeacher: return "teacher";
  }
  return "?";
}

LabelPolicyKind parse_label_policy(std::string_view s) {
  if (s == "interpolated") return LabelPolicyKind::kInterpolated;
  if (s == "sharpened") return LabelPolicyKind::kSharpened;
  if (s == "teacher") return LabelPolicyKind::kTeacher;
  throw std::invalid_argument("unknown label policy '" + std::string(s) +
                              "' (expected interpolated, sharpened or teacher)");
}

SoftLabel interpolate_labels(const SoftLabel& ya, const SoftLabel& yb, MixRatio alpha) {
  if (ya.num_classes() != yb.num_classes() || ya.probs.empty()) {
    throw std::invalid_argument("interpolate_labels: dimension mismatch (" +
                                std::to_string(ya.num_classes()) + " vs " +
                                std::to_string(yb.num_classes()) + ")");
  }
  // The larger weight is taken as given and the smaller one as its exact
  // complement, so (a, b, alpha) and (b, a, 1 - alpha) use identical weights.
  const double a = alpha.value();
  double wa = 0.0;
  double wb = 0.0;
  if (a >= 0.5) {
    wa = a;
    wb = 1.0 - a;
  } else {
    wb = 1.0 - a;
    wa = 1.0 - wb;
  }
  SoftLabel out;
  out.probs.resize(ya.probs.size());
  for (size_t i = 0; i < ya.probs.size(); ++i) out.probs[i] = wa * ya.probs[i] + wb * yb.probs[i];
  return out;
}

SoftLabel interpolate_labels(const Label& ya, const Label& yb, MixRatio alpha, int num_classes) {
  return interpolate_labels(to_soft(ya, num_classes), to_soft(yb, num_classes), alpha);
}

SoftLabel sharpen(const SoftLabel& y, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sharpen: temperature must be positive");
  }
  if (y.probs.empty()) throw std::invalid_argument("sharpen: empty label");
  if (temperature == 1.0) return y;
  // log space keeps small temperatures from underflowing every entry.
  std::vector<double> logs(y.probs.size());
  double top = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < y.probs.size(); ++i) {
    logs[i] = y.probs[i] > 0.0 ? std::log(y.probs[i]) / temperature
                               : -std::numeric_limits<double>::infinity();
    top = std::max(top, logs[i]);
  }
  SoftLabel out;
  out.probs.resize(y.probs.size());
  double total = 0.0;
  for (size_t i = 0; i < logs.size(); ++i) {
    out.probs[i] = std::exp(logs[i] - top);
    total += out.probs[i];
  }
  for (double& p : out.probs) p /= total;
  return out;
}

SoftLabel teacher_label(std::span<const TokenSequence> texts, const Vocabulary& text_vocab,
                        const ClassifierModel& teacher) {
  if (text_vocab.hash() != teacher.vocab_hash()) {
    throw std::invalid_argument("teacher_label: teacher was trained with a different vocabulary");
  }
  return teacher.predict(std::vector<TokenSequence>(texts.begin(), texts.end()));
}

double AlphaDistribution::draw(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::kUniform: return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    case Kind::kBeta: {
      const double x = std::gamma_distribution<double>(beta_a, 1.0)(rng);
      const double y = std::gamma_distribution<double>(beta_b, 1.0)(rng);
      return x + y > 0.0 ? x / (x + y) : 0.5;
    }
    case Kind::kChoice:
      return choices[std::uniform_int_distribution<size_t>(0, choices.size() - 1)(rng)];
  }
  return 0.5;
}

namespace {

std::vector<double> parse_number_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item(text.substr(pos, comma - pos));
    out.push_back(kv::to_double(what, item));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

AlphaDistribution AlphaDistribution::parse(std::string_view spec) {
  AlphaDistribution d;
  if (spec == "uniform") return d;
  if (spec.starts_with("beta:")) {
    const auto v = parse_number_list(spec.substr(5), "alpha distribution");
    if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] > 0.0)) {
      throw std::invalid_argument("alpha distribution '" + std::string(spec) +
                                  "': beta needs two positive parameters");
    }
    d.kind = Kind::kBeta;
    d.beta_a = v[0];
    d.beta_b = v[1];
    return d;
  }
  if (spec.starts_with("choice:")) {
    d.kind = Kind::kChoice;
    d.choices = parse_number_list(spec.substr(7), "alpha distribution");
    if (d.choices.empty()) throw std::invalid_argument("alpha distribution: empty choice list");
    for (double c : d.choices) (void)MixRatio(c);
    return d;
  }
  throw std::invalid_argument("unknown alpha distribution '" + std::string(spec) +
                              "' (expected uniform, beta:a,b or choice:x,y,...)");
}

std::string AlphaDistribution::describe() const {
  switch (kind) {
    case Kind::kUniform: return "uniform";
    case Kind::kBeta: return "beta:" + kv::format_double(beta_a) + "," + kv::format_double(beta_b);
    case Kind::kChoice: {
      std::string s = "choice:";
      for (size_t i = 0; i < choices.size(); ++i) {
        if (i) s += ",";
        s += kv::format_double(choices[i]);
      }
      return s;
    }
  }
  return "?";
}

namespace {

struct RecordOutcome {
  AugmentedExample example;
  int redraws = 0;
  bool empty = false;
  bool copy = false;
};

RecordOutcome augment_one(size_t index, const Dataset& data, const InterpModel& model,
                          const LabelPolicy& policy,
                          const DecodeConfig& decode, const AugmentOptions& options) {
  std::mt19937_64 rng(mix_seed(options.seed, 11, index));
  std::uniform_int_distribution<int> pick(0, data.size() - 1);
  RecordOutcome out;
  std::string last_error;
  for (int attempt = 0; attempt <= options.max_redraws; ++attempt) {
    const int ia = pick(rng);
    const int ib = pick(rng);
    const double alpha = options.alpha.draw(rng);
    const auto& ea = data.examples[ia];
    const auto& eb = data.examples[ib];
    try {
      AugmentedExample ex;
      ex.alpha = alpha;
      ex.source_a = ia;
      ex.source_b = ib;
      bool any_empty = false;
      bool all_copy = true;
      for (size_t t = 0; t < ea.texts.size(); ++t) {
        DecodeConfig c = decode;
        c.seed = mix_seed(decode.seed, 13, index * 64 + static_cast<size_t>(attempt) * 4 + t);
        DecodeResult r = interpolate_text(model, ea.texts[t], eb.texts[t], MixRatio(alpha), c);
        TokenSequence content = r.content();
        ex.truncated = ex.truncated || r.truncated;
        any_empty = any_empty || content.empty();
        all_copy = all_copy && (content.ids == ea.texts[t].ids || content.ids == eb.texts[t].ids);
        ex.texts.push_back(std::move(content));
      }
      const double label_alpha = policy.literal_orientation ? 1.0 - alpha : alpha;
      SoftLabel mixed = interpolate_labels(ea.label, eb.label, MixRatio(label_alpha),
                                           data.num_classes);
      switch (policy.kind) {
        case LabelPolicyKind::kInterpolated: ex.soft_label = std::move(mixed); break;
        case LabelPolicyKind::kSharpened: ex.soft_label = sharpen(mixed, policy.temperature); break;
        case LabelPolicyKind::kTeacher: ex.soft_label = policy.teacher->predict(ex.texts); break;
      }
      out.example = std::move(ex);
      out.empty = any_empty;
      out.copy = all_copy && !any_empty;
      out.redraws = attempt;
      return out;
    } catch (const std::exception& e) {
      last_error = e.what();
      std::cerr << "warning: augment record " << index << ": pair (" << ia << ", " << ib
                << ") failed: " << e.what() << "; redrawing\n";
    }
  }
  throw std::runtime_error("augment record " + std::to_string(index) + ": no successful pair in " +
                           std::to_string(options.max_redraws + 1) + " draws; last error: " +
                           last_error);
}

}  // namespace

std::vector<AugmentedExample> augment_dataset(const Dataset& data, const InterpModel& model,
                                              const Vocabulary& vocab, const LabelPolicy& policy,
                                              const DecodeConfig& decode,
                                              const AugmentOptions& options, AugmentStats* stats) {
  policy.validate();
  decode.validate();
  if (data.examples.empty()) throw std::invalid_argument("augment_dataset: empty dataset");
  if (data.task_kind == TaskKind::kUnlabeledCorpus) {
    throw std::invalid_argument("augment_dataset: dataset has no labels");
  }
  if (vocab.size() != model.config().vocab_size) {
    throw std::invalid_argument("augment_dataset: vocabulary size " + std::to_string(vocab.size()) +
                                " does not match the model (" +
                                std::to_string(model.config().vocab_size) + ")");
  }
  if (policy.kind == LabelPolicyKind::kTeacher) {
    if (policy.teacher->vocab_hash() != vocab.hash()) {
      throw std::invalid_argument("augment_dataset: teacher vocabulary does not match");
    }
    if (policy.teacher->num_classes() != data.num_classes) {
      throw std::invalid_argument("augment_dataset: teacher has " +
                                  std::to_string(policy.teacher->num_classes()) +
                                  " classes, dataset has " + std::to_string(data.num_classes));
    }
  }
  const size_t n = data.examples.size();
  std::vector<RecordOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  auto run_one = [&](size_t i) {
    try {
      outcomes[i] = augment_one(i, data, model, policy, decode, options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int workers = std::clamp(options.workers, 1, static_cast<int>(n));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = static_cast<size_t>(w); i < n; i += static_cast<size_t>(workers)) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<AugmentedExample> rows;
  rows.reserve(n);
  AugmentStats s;
  for (auto& o : outcomes) {
    s.redraws += o.redraws;
    s.empty += o.empty ? 1 : 0;
    s.copies += o.copy ? 1 : 0;
    rows.push_back(std::move(o.example));
  }
  if (stats) *stats = s;
  return rows;
}

void write_augmented_jsonl(std::ostream& out, std::span<const AugmentedExample> rows,
                           const Vocabulary& vocab, TaskKind task_kind) {
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    if (task_kind == TaskKind::kSentencePair) {
      if (r.texts.size() != 2) throw std::invalid_argument("pair record without two texts");
      j["premise"] = detokenize(r.texts[0], vocab);
      j["hypothesis"] = detokenize(r.texts[1], vocab);
    } else {
      if (r.texts.size() != 1) throw std::invalid_argument("single-text record with " +
                                                           std::to_string(r.texts.size()) + " texts");
      j["text"] = detokenize(r.texts[0], vocab);
    }
    j["soft_label"] = r.soft_label.probs;
    j["alpha"] = r.alpha;
    j["source_a"] = r.source_a;
    j["source_b"] = r.source_b;
    j["truncated"] = r.truncated;
    out << j.dump() << '\n';
  }
}

void write_augmented_jsonl(const std::filesystem::path& path,
                           std::span<const AugmentedExample> rows, const Vocabulary& vocab,
                           TaskKind task_kind) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_augmented_jsonl(out, rows, vocab, task_kind);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<AugmentedExample> read_augmented_jsonl(const std::filesystem::path& path,
                                                   const Vocabulary& vocab, TaskKind task_kind,
                                                   int max_length) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<AugmentedExample> rows;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    return std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": " + msg);
  };
  // Generated text may legitimately be empty; those records keep an empty
  // sequence rather than failing tokenization.
  auto text_of = [&](const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw fail(std::string("missing string '") + key + "'");
    const std::string s = j[key].get<std::string>();
    if (s.find_first_not_of(" \t\r\n") == std::string::npos) return TokenSequence{};
    return tokenize(s, vocab, max_length);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    AugmentedExample r;
    if (task_kind == TaskKind::kSentencePair) {
      r.texts.push_back(text_of(j, "premise"));
      r.texts.push_back(text_of(j, "hypothesis"));
    } else {
      r.texts.push_back(text_of(j, "text"));
    }
    if (!j.contains("soft_label") || !j["soft_label"].is_array()) throw fail("missing 'soft_label'");
    try {
      r.soft_label.probs = j["soft_label"].get<std::vector<double>>();
      r.alpha = j.at("alpha").get<double>();
      r.source_a = j.at("source_a").get<int>();
      r.source_b = j.at("source_b").get<int>();
      r.truncated = j.value("truncated", false);
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
    if (!on_simplex(r.soft_label)) throw fail("soft_label is not a probability vector");
    if (!(r.alpha >= 0.0 && r.alpha <= 1.0)) throw fail("alpha outside [0, 1]");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace lerptext
