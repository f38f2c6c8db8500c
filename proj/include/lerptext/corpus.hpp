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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lerptext/labels.hpp"

namespace lerptext {

// Fixed ids of the special tokens; they always occupy the first five slots.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumSpecialTokens = 5;

inline constexpr int kDefaultMaxLength = 64;

/// Bijection between surface tokens and contiguous ids [0, size).
class Vocabulary {
 public:
  /// Builds from the full ordered token list. The first five entries must be
  /// the special tokens in the order PAD, BOS, EOS, UNK, MASK.
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Special tokens followed by `content` in order.
  static Vocabulary with_content(std::span<const std::string> content);

  static const std::vector<std::string>& special_tokens();
  static bool is_special(int id) { return id >= 0 && id < kNumSpecialTokens; }

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(int id) const { return id >= 0 && id < size(); }
  std::optional<int> find(std::string_view token) const;
  int id_or_unk(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, UTF-8, newline-terminated.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  /// SHA-256 of the serialized form, lowercase hex.
  std::string hash() const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Splits raw text into surface tokens. Word-level whitespace splitting is
/// the default; subword schemes can implement this interface.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> split(std::string_view text) const = 0;
};

class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> split(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

/// Content token ids; special BOS/EOS are added only at the decoder boundary.
struct TokenSequence {
  std::vector<int> ids;

  TokenSequence() = default;
  explicit TokenSequence(std::vector<int> v) : ids(std::move(v)) {}

  int length() const { return static_cast<int>(ids.size()); }
  bool empty() const { return ids.empty(); }
  bool operator==(const TokenSequence&) const = default;
};

/// Throws unless 1 <= length <= max_length and every id is in `vocab`.
void validate(const TokenSequence& x, const Vocabulary& vocab,
              int max_length = kDefaultMaxLength);

Vocabulary build_vocabulary(std::span<const std::string> corpus, int max_size,
                            const Tokenizer& tokenizer = default_tokenizer());
Vocabulary build_vocabulary(std::istream& corpus, int max_size,
                            const Tokenizer& tokenizer = default_tokenizer());

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       int max_length = kDefaultMaxLength,
                       const Tokenizer& tokenizer = default_tokenizer());

/// Joins token surfaces with single spaces. Specials are dropped unless
/// `keep_special` is set.
std::string detokenize(const TokenSequence& x, const Vocabulary& vocab,
                       bool keep_special = false);

enum class TaskKind { kSingleSentence, kSentencePair, kUnlabeledCorpus };
enum class DataFormat { kTsv, kJsonl };

struct LabeledExample {
  std::vector<TokenSequence> texts;  // one entry, or premise + hypothesis
  Label label = 0;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  int num_classes = 0;
  TaskKind task_kind = TaskKind::kSingleSentence;

  int size() const { return static_cast<int>(examples.size()); }
  int texts_per_example() const {
    return task_kind == TaskKind::kSentencePair ? 2 : 1;
  }
};

struct LoadOptions {
  int max_length = kDefaultMaxLength;
  /// When unset the class count is inferred as max label + 1.
  std::optional<int> num_classes;
};

Dataset load_labeled_dataset(const std::filesystem::path& path,
                             DataFormat format, TaskKind task_kind,
                             const Vocabulary& vocab,
                             const LoadOptions& options = {});

/// Non-empty lines of a UTF-8 text file.
std::vector<std::string> load_corpus(const std::filesystem::path& path);

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view s);
DataFormat parse_data_format(std::string_view s);
/// Picks TSV or JSONL from a file extension.
DataFormat guess_format(const std::filesystem::path& path);

}  // namespace lerptext
