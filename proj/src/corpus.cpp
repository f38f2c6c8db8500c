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

#include "lerptext/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "lerptext/hashing.hpp"

namespace lerptext {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::runtime_error line_error(const std::filesystem::path& path, int line,
                              const std::string& what) {
  return std::runtime_error(path.string() + ": line " + std::to_string(line) +
                            ": " + what);
}

}  // namespace

const std::vector<std::string>& Vocabulary::special_tokens() {
  static const std::vector<std::string> kSpecials = {"<pad>", "<s>", "</s>",
                                                     "<unk>", "<mask>"};
  return kSpecials;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& sp = special_tokens();
  if (tokens_.size() < sp.size() ||
      !std::equal(sp.begin(), sp.end(), tokens_.begin())) {
    throw std::invalid_argument(
        "vocabulary must start with <pad> <s> </s> <unk> <mask>");
  }
  index_.reserve(tokens_.size());
  for (int i = 0; i < size(); ++i) {
    if (tokens_[i].empty()) throw std::invalid_argument("empty token in vocabulary");
    if (!index_.emplace(tokens_[i], i).second) {
      throw std::invalid_argument("duplicate token in vocabulary: " + tokens_[i]);
    }
  }
}

Vocabulary Vocabulary::with_content(std::span<const std::string> content) {
  std::vector<std::string> all = special_tokens();
  all.insert(all.end(), content.begin(), content.end());
  return Vocabulary(std::move(all));
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id_or_unk(std::string_view token) const {
  return find(token).value_or(kUnkId);
}

const std::string& Vocabulary::token(int id) const {
  if (!contains(id)) throw std::out_of_range("token id " + std::to_string(id));
  return tokens_[id];
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(strip_cr(std::move(line)));
  return Vocabulary(std::move(tokens));
}

std::string Vocabulary::hash() const { return sha256_hex(serialize()); }

std::vector<std::string> WhitespaceTokenizer::split(std::string_view text) const {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer kTokenizer;
  return kTokenizer;
}

void validate(const TokenSequence& x, const Vocabulary& vocab, int max_length) {
  if (x.length() < 1) throw std::invalid_argument("empty token sequence");
  if (x.length() > max_length) {
    throw std::invalid_argument("token sequence of length " +
                                std::to_string(x.length()) + " exceeds max " +
                                std::to_string(max_length));
  }
  for (int id : x.ids) {
    if (!vocab.contains(id)) {
      throw std::out_of_range("token id " + std::to_string(id) +
                              " outside vocabulary of size " +
                              std::to_string(vocab.size()));
    }
  }
}

Vocabulary build_vocabulary(std::span<const std::string> corpus, int max_size,
                            const Tokenizer& tokenizer) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  if (max_size <= kNumSpecialTokens) {
    throw std::invalid_argument("max_size must leave room for content tokens");
  }
  const auto& specials = Vocabulary::special_tokens();
  // token -> (count, first occurrence)
  std::unordered_map<std::string, std::pair<long, long>> freq;
  long seen = 0;
  for (const auto& line : corpus) {
    for (auto& tok : tokenizer.split(line)) {
      if (std::find(specials.begin(), specials.end(), tok) != specials.end()) continue;
      auto [it, inserted] = freq.try_emplace(std::move(tok), 0, seen);
      it->second.first += 1;
      ++seen;
    }
  }
  if (freq.empty()) throw std::invalid_argument("empty corpus");
  std::vector<std::pair<std::string, std::pair<long, long>>> ranked(freq.begin(),
                                                                    freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });
  const size_t keep = std::min(ranked.size(), static_cast<size_t>(max_size - kNumSpecialTokens));
  std::vector<std::string> content;
  content.reserve(keep);
  for (size_t i = 0; i < keep; ++i) content.push_back(ranked[i].first);
  return Vocabulary::with_content(content);
}

Vocabulary build_vocabulary(std::istream& corpus, int max_size,
                            const Tokenizer& tokenizer) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(corpus, line)) lines.push_back(strip_cr(std::move(line)));
  return build_vocabulary(lines, max_size, tokenizer);
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       int max_length, const Tokenizer& tokenizer) {
  if (max_length < 1) throw std::invalid_argument("max_length must be positive");
  auto pieces = tokenizer.split(text);
  if (pieces.empty()) throw std::invalid_argument("empty input text");
  TokenSequence seq;
  const size_t n = std::min(pieces.size(), static_cast<size_t>(max_length));
  seq.ids.reserve(n);
  for (size_t i = 0; i < n; ++i) seq.ids.push_back(vocab.id_or_unk(pieces[i]));
  return seq;
}

std::string detokenize(const TokenSequence& x, const Vocabulary& vocab,
                       bool keep_special) {
  std::string out;
  for (int id : x.ids) {
    if (!keep_special && Vocabulary::is_special(id)) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kSingleSentence: return "single";
    case TaskKind::kSentencePair: return "pair";
    case TaskKind::kUnlabeledCorpus: return "unlabeled";
  }
  return "single";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "single" || s == "single-sentence") return TaskKind::kSingleSentence;
  if (s == "pair" || s == "sentence-pair") return TaskKind::kSentencePair;
  if (s == "unlabeled" || s == "unlabeled-corpus") return TaskKind::kUnlabeledCorpus;
  throw std::invalid_argument("unknown task kind: " + std::string(s));
}

DataFormat parse_data_format(std::string_view s) {
  if (s == "tsv") return DataFormat::kTsv;
  if (s == "jsonl") return DataFormat::kJsonl;
  throw std::invalid_argument("unknown data format: " + std::string(s));
}

DataFormat guess_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".tsv" || ext == ".txt") return DataFormat::kTsv;
  return DataFormat::kJsonl;
}

Dataset load_labeled_dataset(const std::filesystem::path& path,
                             DataFormat format, TaskKind task_kind,
                             const Vocabulary& vocab,
                             const LoadOptions& options) {
  if (task_kind == TaskKind::kUnlabeledCorpus) {
    throw std::invalid_argument("use load_corpus for unlabeled corpora");
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());

  const bool pair = task_kind == TaskKind::kSentencePair;
  Dataset ds;
  ds.task_kind = task_kind;
  int max_label = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::vector<std::string> texts;
    long label = -1;
    if (format == DataFormat::kJsonl) {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw line_error(path, lineno, std::string("malformed JSON: ") + e.what());
      }
      if (!rec.is_object()) throw line_error(path, lineno, "record is not an object");
      const std::vector<std::string> fields =
          pair ? std::vector<std::string>{"premise", "hypothesis"}
               : std::vector<std::string>{"text"};
      for (const auto& f : fields) {
        if (!rec.contains(f) || !rec[f].is_string()) {
          throw line_error(path, lineno, "missing string field \"" + f + "\"");
        }
        texts.push_back(rec[f].get<std::string>());
      }
      if (!rec.contains("label") || !rec["label"].is_number_integer()) {
        throw line_error(path, lineno, "missing integer field \"label\"");
      }
      label = rec["label"].get<long>();
    } else {
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      const size_t want = pair ? 3 : 2;
      if (cols.size() != want) {
        throw line_error(path, lineno,
                         "expected " + std::to_string(want) + " tab-separated fields, got " +
                             std::to_string(cols.size()));
      }
      texts.assign(cols.begin(), cols.end() - 1);
      try {
        size_t used = 0;
        label = std::stol(cols.back(), &used);
        if (used != cols.back().size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw line_error(path, lineno, "label is not an integer: " + cols.back());
      }
    }
    if (label < 0) throw line_error(path, lineno, "negative label");
    if (options.num_classes && label >= *options.num_classes) {
      throw line_error(path, lineno,
                       "label " + std::to_string(label) + " out of range for " +
                           std::to_string(*options.num_classes) + " classes");
    }
    LabeledExample ex;
    for (const auto& t : texts) {
      try {
        ex.texts.push_back(tokenize(t, vocab, options.max_length));
      } catch (const std::invalid_argument& e) {
        throw line_error(path, lineno, e.what());
      }
    }
    ex.label = static_cast<int>(label);
    max_label = std::max(max_label, static_cast<int>(label));
    ds.examples.push_back(std::move(ex));
  }
  ds.num_classes = options.num_classes.value_or(max_label + 1);
  if (ds.num_classes < 2) {
    throw std::runtime_error(path.string() + ": labeled dataset needs at least 2 classes");
  }
  return ds;
}

std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(std::move(line));
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
  }
  if (lines.empty()) throw std::runtime_error("empty corpus: " + path.string());
  return lines;
}

}  // namespace lerptext
