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

#include "lerptext/synthetic.hpp"

#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>
#include <string_view>

namespace lerptext::synthetic {

namespace {

constexpr std::array<std::string_view, 16> kNouns = {
    "movie", "film",   "plot",     "acting",   "story",  "soundtrack",
    "ending", "cast",  "director", "script",   "dialogue", "camera",
    "scene", "music",  "show",     "characters"};
constexpr std::array<std::string_view, 10> kPositive = {
    "great", "wonderful", "brilliant", "charming", "delightful",
    "superb", "moving",   "excellent", "beautiful", "fun"};
constexpr std::array<std::string_view, 10> kNegative = {
    "terrible", "boring", "awful", "dull",  "weak",
    "messy",    "painful", "bland", "clumsy", "tedious"};
constexpr std::array<std::string_view, 6> kIntensifiers = {"very", "really", "quite",
                                                           "truly", "rather", "so"};
constexpr std::array<std::string_view, 5> kPeople = {"my friends", "the critics", "everyone",
                                                     "my sister", "the audience"};
constexpr std::array<std::string_view, 4> kDeterminers = {"the", "this", "that", "our"};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  template <size_t N>
  std::string_view pick(const std::array<std::string_view, N>& xs) {
    return xs[std::uniform_int_distribution<size_t>(0, N - 1)(rng_)];
  }
  int coin() { return std::uniform_int_distribution<int>(0, 1)(rng_); }

  std::string adjective(int positive) {
    return std::string(positive ? pick(kPositive) : pick(kNegative));
  }

  std::string sentence(int positive) {
    const std::string n1(pick(kNouns));
    const std::string n2(pick(kNouns));
    const std::string det(pick(kDeterminers));
    const std::string in(pick(kIntensifiers));
    switch (std::uniform_int_distribution<int>(0, 9)(rng_)) {
      case 0: return "the " + n1 + " was " + in + " " + adjective(positive);
      case 1: return det + " " + n1 + " is " + adjective(positive) + " and " + adjective(positive);
      case 2: return "i think the " + n1 + " was " + adjective(positive);
      case 3: return "the " + n1 + " and the " + n2 + " were " + in + " " + adjective(positive);
      case 4: return "what a " + adjective(positive) + " " + n1;
      case 5: return std::string(pick(kPeople)) + " said the " + n1 + " is " + adjective(positive);
      case 6: return "the " + n1 + " of " + det + " " + n2 + " was " + adjective(positive);
      case 7:
        return "it was a " + adjective(positive) + " " + n1 + " with a " + in + " " +
               adjective(positive) + " " + n2;
      case 8: return "even the " + n1 + " seemed " + adjective(positive) + " to me";
      default: return det + " " + n1 + " felt " + in + " " + adjective(positive) + " overall";
    }
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<std::string> review_corpus(int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("review_corpus: negative count");
  Generator gen(seed);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(gen.sentence(gen.coin()));
  return out;
}

std::vector<LabeledText> sentiment_task(int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("sentiment_task: negative count");
  Generator gen(seed);
  std::vector<LabeledText> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label = gen.coin();
    out.push_back({gen.sentence(label), label});
  }
  return out;
}

std::vector<LabeledPair> agreement_task(int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("agreement_task: negative count");
  Generator gen(seed);
  std::vector<LabeledPair> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int p = gen.coin();
    const int h = gen.coin();
    out.push_back({gen.sentence(p), gen.sentence(h), p == h ? 1 : 0});
  }
  return out;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

void write_jsonl(const std::filesystem::path& path, const std::vector<LabeledText>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) {
    out << nlohmann::json{{"text", r.text}, {"label", r.label}}.dump() << '\n';
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<LabeledPair>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) {
    out << nlohmann::json{{"premise", r.premise}, {"hypothesis", r.hypothesis}, {"label", r.label}}
               .dump()
        << '\n';
  }
}

}  // namespace lerptext::synthetic
