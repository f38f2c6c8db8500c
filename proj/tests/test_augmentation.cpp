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

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "lerptext/augmentation.hpp"
#include "lerptext/classifier.hpp"
#include "test_util.hpp"

namespace lerptext {
namespace {

using testing::random_seq;
using testing::scratch_dir;
using testing::tiny_config;

void expect_probs(const SoftLabel& y, std::vector<double> expected, double tol = 1e-12) {
  ASSERT_EQ(y.probs.size(), expected.size());
  for (size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.probs[i], expected[i], tol) << i;
}

TEST(InterpolateLabels, HardLabelExamples) {
  expect_probs(interpolate_labels(Label{0}, Label{1}, MixRatio(0.3), 2), {0.3, 0.7});
  expect_probs(interpolate_labels(Label{1}, Label{1}, MixRatio(0.42), 2), {0.0, 1.0});
  expect_probs(interpolate_labels(Label{2}, Label{0}, MixRatio(1.0), 3), {0.0, 0.0, 1.0});
  expect_probs(interpolate_labels(Label{2}, Label{0}, MixRatio(0.0), 3), {1.0, 0.0, 0.0});
}

TEST(InterpolateLabels, SoftLabelsStayOnSimplexAndSwapExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    SoftLabel a{{u(rng), u(rng), u(rng)}}, b{{u(rng), u(rng), u(rng)}};
    for (auto* y : {&a, &b}) {
      double s = 0;
      for (double p : y->probs) s += p;
      for (double& p : y->probs) p /= s;
    }
    const double alpha = u(rng);
    const SoftLabel ab = interpolate_labels(a, b, MixRatio(alpha));
    const SoftLabel ba = interpolate_labels(b, a, MixRatio(1.0 - alpha));
    EXPECT_TRUE(on_simplex(ab, 1e-12));
    EXPECT_EQ(ab, ba) << alpha;
  }
  EXPECT_THROW(interpolate_labels(SoftLabel{{1.0, 0.0}}, SoftLabel{{1.0, 0.0, 0.0}}, MixRatio(0.5)),
               std::invalid_argument);
}

TEST(Sharpen, Examples) {
  expect_probs(sharpen(SoftLabel{{0.6, 0.4}}, 0.5), {0.6923076923076923, 0.3076923076923077});
  const SoftLabel y{{0.2, 0.5, 0.3}};
  EXPECT_EQ(sharpen(y, 1.0), y);
  expect_probs(sharpen(SoftLabel{{0.5, 0.5}}, 0.1), {0.5, 0.5});
  EXPECT_THROW(sharpen(y, 0.0), std::invalid_argument);
  EXPECT_THROW(sharpen(y, -1.0), std::invalid_argument);
}

TEST(Sharpen, PropertiesOnRandomLabels) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 300; ++i) {
    SoftLabel y{{u(rng), u(rng), u(rng), u(rng)}};
    double s = 0;
    for (double p : y.probs) s += p;
    for (double& p : y.probs) p /= s;
    const SoftLabel hot = sharpen(y, 0.25);
    const SoftLabel flat = sharpen(y, 4.0);
    EXPECT_TRUE(on_simplex(hot, 1e-12));
    EXPECT_TRUE(on_simplex(flat, 1e-12));
    EXPECT_EQ(hot.argmax(), y.argmax());
    EXPECT_GE(hot.probs[y.argmax()], y.probs[y.argmax()] - 1e-15);
    EXPECT_LE(flat.probs[y.argmax()], y.probs[y.argmax()] + 1e-15);
  }
  // Very low temperature approaches a one-hot without overflow.
  expect_probs(sharpen(SoftLabel{{0.7, 0.3}}, 1e-3), {1.0, 0.0});
}

std::vector<std::string> words(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("w" + std::to_string(i));
  return out;
}

ag::Parameter& find_param(ClassifierModel& m, const std::string& name) {
  for (auto* p : m.parameters()) {
    if (p->name == name) return *p;
  }
  throw std::runtime_error("no parameter " + name);
}

TEST(TeacherLabel, FixedOutputLayer) {
  const auto content = words(27);
  const Vocabulary vocab = Vocabulary::with_content(content);
  ClassifierModel teacher(vocab, 2, 1, ClassifierConfig{});
  find_param(teacher, "clf.out.w").value.setZero();
  find_param(teacher, "clf.out.b").value.setZero();
  const std::vector<TokenSequence> texts = {tokenize("w1 w2 w3", vocab)};
  expect_probs(teacher_label(texts, vocab, teacher), {0.5, 0.5});
  find_param(teacher, "clf.out.b").value << 2.0, 0.0;
  expect_probs(teacher_label(texts, vocab, teacher), {0.8807970779778824, 0.11920292202211755});

  const auto other_words = words(28);
  const Vocabulary other = Vocabulary::with_content(other_words);
  EXPECT_THROW(teacher_label(texts, other, teacher), std::invalid_argument);
}

TEST(AlphaDistribution, ParseAndDraw) {
  std::mt19937_64 rng(5);
  const auto u = AlphaDistribution::parse("uniform");
  const auto b = AlphaDistribution::parse("beta:0.5,0.5");
  const auto c = AlphaDistribution::parse("choice:0,1");
  EXPECT_EQ(b.kind, AlphaDistribution::Kind::kBeta);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.draw(rng), y = b.draw(rng), z = c.draw(rng);
    EXPECT_TRUE(x >= 0.0 && x <= 1.0);
    EXPECT_TRUE(y >= 0.0 && y <= 1.0);
    EXPECT_TRUE(z == 0.0 || z == 1.0);
  }
  EXPECT_EQ(AlphaDistribution::parse(c.describe()).choices, c.choices);
  EXPECT_THROW(AlphaDistribution::parse("gauss"), std::invalid_argument);
  EXPECT_THROW(AlphaDistribution::parse("choice:0.2,1.7"), std::out_of_range);
  EXPECT_THROW(AlphaDistribution::parse("beta:0,1"), std::invalid_argument);
}

class AugmentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(61);
    for (int i = 0; i < 50; ++i) {
      LabeledExample ex;
      ex.texts.push_back(random_seq(rng, 2 + i % 4, 32));
      ex.label = i % 2;
      single.examples.push_back(ex);
      ex.texts.push_back(random_seq(rng, 3, 32));
      ex.label = i % 3;
      pair.examples.push_back(ex);
    }
    single.num_classes = 2;
    pair.num_classes = 3;
    pair.task_kind = TaskKind::kSentencePair;
    decode.strategy = DecodeStrategy::kGreedy;
    decode.max_decode_length = 8;
  }

  const std::vector<std::string> content = words(27);
  const Vocabulary vocab = Vocabulary::with_content(content);
  InterpModel model{tiny_config(), 71};
  Dataset single;
  Dataset pair;
  DecodeConfig decode;
};

TEST_F(AugmentTest, OneRecordPerInputWithValidLabels) {
  AugmentOptions opts;
  opts.seed = 9;
  AugmentStats stats;
  const auto rows = augment_dataset(single, model, vocab, LabelPolicy{}, decode, opts, &stats);
  ASSERT_EQ(rows.size(), 50u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.texts.size(), 1u);
    EXPECT_TRUE(on_simplex(r.soft_label, 1e-12));
    EXPECT_TRUE(r.alpha >= 0.0 && r.alpha <= 1.0);
    ASSERT_TRUE(r.source_a >= 0 && r.source_a < 50);
    ASSERT_TRUE(r.source_b >= 0 && r.source_b < 50);
    const SoftLabel expected = interpolate_labels(single.examples[r.source_a].label,
                                                  single.examples[r.source_b].label,
                                                  MixRatio(r.alpha), 2);
    EXPECT_EQ(r.soft_label, expected);
  }
  EXPECT_EQ(stats.redraws, 0);
}

TEST_F(AugmentTest, PairTaskKeepsTwoTexts) {
  AugmentOptions opts;
  const auto rows = augment_dataset(pair, model, vocab, LabelPolicy{}, decode, opts);
  ASSERT_EQ(rows.size(), 50u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.texts.size(), 2u);
    EXPECT_EQ(r.soft_label.num_classes(), 3);
  }
}

TEST_F(AugmentTest, EndpointRatiosGiveSourceLabels) {
  AugmentOptions opts;
  opts.alpha = AlphaDistribution::parse("choice:0,1");
  const auto rows = augment_dataset(single, model, vocab, LabelPolicy{}, decode, opts);
  for (const auto& r : rows) {
    const int src = r.alpha == 1.0 ? r.source_a : r.source_b;
    EXPECT_EQ(r.soft_label, one_hot(std::get<int>(single.examples[src].label), 2));
  }
  LabelPolicy literal;
  literal.literal_orientation = true;
  const auto flipped = augment_dataset(single, model, vocab, literal, decode, opts);
  for (const auto& r : flipped) {
    const int src = r.alpha == 1.0 ? r.source_b : r.source_a;
    EXPECT_EQ(r.soft_label, one_hot(std::get<int>(single.examples[src].label), 2));
  }
}

TEST_F(AugmentTest, SharpenedAndTeacherPolicies) {
  AugmentOptions opts;
  LabelPolicy sharp;
  sharp.kind = LabelPolicyKind::kSharpened;
  sharp.temperature = 0.5;
  const auto base = augment_dataset(single, model, vocab, LabelPolicy{}, decode, opts);
  const auto rows = augment_dataset(single, model, vocab, sharp, decode, opts);
  for (size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].soft_label, sharpen(base[i].soft_label, 0.5));
  }

  ClassifierModel teacher(vocab, 2, 1, ClassifierConfig{});
  LabelPolicy tp;
  tp.kind = LabelPolicyKind::kTeacher;
  tp.teacher = &teacher;
  const auto taught = augment_dataset(single, model, vocab, tp, decode, opts);
  for (const auto& r : taught) {
    if (r.texts[0].empty()) continue;
    EXPECT_EQ(r.soft_label, teacher.predict(r.texts));
  }
  ClassifierModel wrong(vocab, 3, 1, ClassifierConfig{});
  tp.teacher = &wrong;
  EXPECT_THROW(augment_dataset(single, model, vocab, tp, decode, opts), std::invalid_argument);
  tp.teacher = nullptr;
  EXPECT_THROW(augment_dataset(single, model, vocab, tp, decode, opts), std::invalid_argument);
}

TEST_F(AugmentTest, ReproducibleAndWorkerIndependent) {
  AugmentOptions opts;
  opts.seed = 3;
  const auto dir = scratch_dir("augment_repro");
  const auto r1 = augment_dataset(single, model, vocab, LabelPolicy{}, decode, opts);
  opts.workers = 3;
  const auto r2 = augment_dataset(single, model, vocab, LabelPolicy{}, decode, opts);
  write_augmented_jsonl(dir / "a.jsonl", r1, vocab, TaskKind::kSingleSentence);
  write_augmented_jsonl(dir / "b.jsonl", r2, vocab, TaskKind::kSingleSentence);
  std::ifstream a(dir / "a.jsonl"), b(dir / "b.jsonl");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_FALSE(sa.str().empty());

  opts.seed = 4;
  const auto r3 = augment_dataset(single, model, vocab, LabelPolicy{}, decode, opts);
  bool differ = false;
  for (size_t i = 0; i < r1.size(); ++i) differ |= r1[i].source_a != r3[i].source_a;
  EXPECT_TRUE(differ);
}

TEST_F(AugmentTest, JsonlRoundTrip) {
  const auto dir = scratch_dir("augment_jsonl");
  for (const Dataset* d : {&single, &pair}) {
    const auto rows = augment_dataset(*d, model, vocab, LabelPolicy{}, decode, AugmentOptions{});
    write_augmented_jsonl(dir / "rows.jsonl", rows, vocab, d->task_kind);
    const auto back = read_augmented_jsonl(dir / "rows.jsonl", vocab, d->task_kind);
    ASSERT_EQ(back.size(), rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(back[i].texts, rows[i].texts);
      EXPECT_EQ(back[i].source_a, rows[i].source_a);
      EXPECT_EQ(back[i].truncated, rows[i].truncated);
      EXPECT_DOUBLE_EQ(back[i].alpha, rows[i].alpha);
      for (size_t k = 0; k < rows[i].soft_label.probs.size(); ++k) {
        EXPECT_DOUBLE_EQ(back[i].soft_label.probs[k], rows[i].soft_label.probs[k]);
      }
    }
  }
  std::ofstream(dir / "bad.jsonl") << "{\"text\":\"w1\",\"soft_label\":[0.7,0.7],\"alpha\":0.5}\n";
  EXPECT_THROW(read_augmented_jsonl(dir / "bad.jsonl", vocab, TaskKind::kSingleSentence),
               std::exception);
}

TEST_F(AugmentTest, RejectsMismatchedVocabulary) {
  const auto more = words(40);
  const Vocabulary big = Vocabulary::with_content(more);
  EXPECT_THROW(augment_dataset(single, model, big, LabelPolicy{}, decode, AugmentOptions{}),
               std::invalid_argument);
  Dataset empty;
  EXPECT_THROW(augment_dataset(empty, model, vocab, LabelPolicy{}, decode, AugmentOptions{}),
               std::invalid_argument);
}

TEST(LabelPolicy, ParseNames) {
  EXPECT_EQ(parse_label_policy("interpolated"), LabelPolicyKind::kInterpolated);
  EXPECT_EQ(parse_label_policy("sharpened"), LabelPolicyKind::kSharpened);
  EXPECT_EQ(parse_label_policy("teacher"), LabelPolicyKind::kTeacher);
  EXPECT_EQ(to_string(LabelPolicyKind::kSharpened), "sharpened");
  EXPECT_THROW(parse_label_policy("soft"), std::invalid_argument);
}

}  // namespace
}  // namespace lerptext
