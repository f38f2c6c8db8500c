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

#include <cmath>
#include <random>

#include "lerptext/model.hpp"
#include "test_util.hpp"

namespace lerptext {
namespace {

using testing::random_seq;
using testing::seq;
using testing::tiny_config;

TEST(MixRatio, RejectsOutsideUnitInterval) {
  EXPECT_NO_THROW(MixRatio(0.0));
  EXPECT_NO_THROW(MixRatio(1.0));
  EXPECT_THROW(MixRatio(-0.01), std::out_of_range);
  EXPECT_THROW(MixRatio(1.5), std::out_of_range);
  EXPECT_THROW(MixRatio(std::nan("")), std::out_of_range);
}

TEST(InterpLength, Examples) {
  EXPECT_EQ(interp_length(5, 3, MixRatio(0.5)), 4);
  EXPECT_EQ(interp_length(5, 3, MixRatio(1.0)), 5);
  EXPECT_EQ(interp_length(5, 3, MixRatio(0.0)), 3);
  EXPECT_EQ(interp_length(5, 3, MixRatio(0.3)), 4);
  EXPECT_EQ(interp_length(1, 1, MixRatio(0.7)), 1);
}

TEST(InterpLength, ExhaustiveAgainstRationalCeiling) {
  // alpha = p / q exactly representable as a rational; the weighted length is
  // (p La + (q - p) Lb) / q and its ceiling is computed in integers.
  for (int q : {2, 4, 5, 10, 20}) {
    for (int p = 0; p <= q; ++p) {
      const double alpha = static_cast<double>(p) / q;
      for (int la = 1; la <= 20; ++la) {
        for (int lb = 1; lb <= 20; ++lb) {
          const int num = p * la + (q - p) * lb;
          const int expected = (num + q - 1) / q;
          ASSERT_EQ(interp_length(la, lb, MixRatio(alpha)), expected)
              << la << " " << lb << " " << p << "/" << q;
        }
      }
    }
  }
}

TEST(InterpLength, BoundedAndRejectsEmpty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const int la = 1 + static_cast<int>(rng() % 30), lb = 1 + static_cast<int>(rng() % 30);
    const int lt = interp_length(la, lb, MixRatio(u(rng)));
    EXPECT_GE(lt, std::min(la, lb));
    EXPECT_LE(lt, std::max(la, lb));
  }
  EXPECT_THROW(interp_length(0, 3, MixRatio(0.5)), std::invalid_argument);
}

TEST(ConvertLength, RowsAreConvexCombinations) {
  std::mt19937_64 rng(5);
  EncodedSequence h{ag::Matrix::Random(6, 4)};
  for (int target : {1, 3, 6, 9}) {
    const ag::Matrix c = convert_length(h, target, 0.8);
    ASSERT_EQ(c.rows(), target);
    ASSERT_EQ(c.cols(), 4);
    const ag::Matrix w = ag::length_weights(6, target, 0.8);
    EXPECT_TRUE((w * h.vectors - c).cwiseAbs().maxCoeff() < 1e-12);
    for (int j = 0; j < target; ++j) {
      EXPECT_NEAR(w.row(j).sum(), 1.0, 1e-12);
      EXPECT_GE(w.row(j).minCoeff(), 0.0);
    }
  }
}

TEST(ConvertLength, LargeSpreadAveragesInputs) {
  EncodedSequence h{ag::Matrix(2, 2)};
  h.vectors << 1.0, -2.0, 3.0, 4.0;
  const ag::Matrix c = convert_length(h, 1, 1e4);
  EXPECT_NEAR(c(0, 0), 2.0, 1e-6);
  EXPECT_NEAR(c(0, 1), 1.0, 1e-6);
}

TEST(ConvertLength, SmallSpreadSelectsAlignedPosition) {
  EncodedSequence h{ag::Matrix(4, 1)};
  h.vectors << 10.0, 20.0, 30.0, 40.0;
  const ag::Matrix c = convert_length(h, 2, 0.05);  // centers at 2 and 4
  EXPECT_NEAR(c(0, 0), 20.0, 1e-9);
  EXPECT_NEAR(c(1, 0), 40.0, 1e-9);
  EXPECT_THROW(convert_length(h, 0, 1.0), std::invalid_argument);
}

TEST(InterpolateStates, ExactAtEndpointsAndLinearInside) {
  ag::Matrix a = ag::Matrix::Random(3, 4), b = ag::Matrix::Random(3, 4);
  EXPECT_TRUE(interpolate_states(a, b, MixRatio(1.0), 3, 5).vectors == a);
  EXPECT_TRUE(interpolate_states(a, b, MixRatio(0.0), 3, 5).vectors == b);
  const auto mid = interpolate_states(a, b, MixRatio(0.25), 3, 5);
  EXPECT_LT((mid.vectors - (0.25 * a + 0.75 * b)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(mid.target_length, 3);
  EXPECT_EQ(mid.length_a, 3);
  EXPECT_EQ(mid.length_b, 5);

  ag::Matrix v = ag::Matrix::Random(2, 3);
  EXPECT_LT(interpolate_states(v, -v, MixRatio(0.5), 2, 2).vectors.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(interpolate_states(a, ag::Matrix::Random(2, 4), MixRatio(0.5), 3, 2),
               std::invalid_argument);
}

class ModelTest : public ::testing::Test {
 protected:
  InterpModel model{tiny_config(), 11};
  std::mt19937_64 rng{17};
};

TEST_F(ModelTest, ConstructionIsDeterministicPerSeed) {
  InterpModel same(tiny_config(), 11), other(tiny_config(), 12);
  auto p = model.parameters();
  auto q = same.parameters();
  auto r = other.parameters();
  ASSERT_EQ(p.size(), q.size());
  bool any_diff = false;
  for (size_t i = 0; i < p.size(); ++i) {
    EXPECT_TRUE(p[i]->value == q[i]->value) << p[i]->name;
    if (p[i]->value != r[i]->value) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
  EXPECT_NEAR(model.sigma(), 1.0, 1e-12);
  EXPECT_EQ(p.back()->name, model.sigma_raw().name);
}

TEST_F(ModelTest, EncodeShapeAndIndependenceFromBatchmates) {
  const TokenSequence x = random_seq(rng, 5, 32);
  const TokenSequence y = random_seq(rng, 3, 32);
  const EncodedSequence ex = encode(model, x);
  EXPECT_EQ(ex.vectors.rows(), 5);
  EXPECT_EQ(ex.vectors.cols(), 8);
  EXPECT_TRUE(encode(model, x).vectors == ex.vectors);

  ag::Graph g(false);
  std::vector<TokenSequence> both = {y, x};
  ag::Segments layout;
  ag::Var h = model.encode(g, both, &layout);
  EXPECT_LT((h.value().middleRows(3, 5) - ex.vectors).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(encode(model, seq({40})), std::out_of_range);
  EXPECT_THROW(encode(model, TokenSequence{}), std::invalid_argument);
}

TEST_F(ModelTest, StepLogprobsNormalizedAndCausal) {
  const TokenSequence a = random_seq(rng, 4, 32), b = random_seq(rng, 6, 32);
  const InterpolatedState st = build_state(model, a, b, MixRatio(0.4));
  EXPECT_EQ(st.target_length, interp_length(4, 6, MixRatio(0.4)));
  const TokenSequence y = random_seq(rng, 5, 32);
  const ag::Matrix lp = decoder_step_logprobs(model, st, y);
  ASSERT_EQ(lp.rows(), 6);
  ASSERT_EQ(lp.cols(), 32);
  for (int t = 0; t < lp.rows(); ++t) EXPECT_NEAR(lp.row(t).array().exp().sum(), 1.0, 1e-12);

  // Rows for a prefix do not depend on later tokens.
  TokenSequence prefix = y;
  prefix.ids.resize(2);
  const ag::Matrix lp2 = decoder_step_logprobs(model, st, prefix);
  EXPECT_LT((lp2 - lp.topRows(3)).cwiseAbs().maxCoeff(), 1e-12);

  double chain = 0.0;
  for (int t = 0; t < y.length(); ++t) chain += lp(t, y.ids[t]);
  chain += lp(y.length(), kEosId);
  EXPECT_NEAR(decoder_logprob(model, st, y), chain, 1e-12);
  EXPECT_LE(decoder_logprob(model, st, y), 0.0);
}

TEST(ModelSmall, SequenceProbabilitiesSumBelowOne) {
  // Vocabulary of 7: every length-1 and length-2 target, plus EOS. The total
  // mass of those sequences plus the mass continuing past length 2 is one.
  InterpModel m(tiny_config(7, 4), 2);
  const InterpolatedState st = build_state(m, seq({5, 6}), seq({6}), MixRatio(0.5));
  double finished = 0.0;
  double continuing = 0.0;
  for (int t1 = 0; t1 < 7; ++t1) {
    if (t1 == kEosId) continue;
    for (int t2 = 0; t2 < 7; ++t2) {
      if (t2 == kEosId) continue;
      const ag::Matrix lp = decoder_step_logprobs(m, st, seq({t1, t2}));
      const double p12 = std::exp(lp(0, t1) + lp(1, t2));
      finished += p12 * std::exp(lp(2, kEosId));
      continuing += p12 * (1.0 - std::exp(lp(2, kEosId)));
    }
    const double p1 = std::exp(decoder_logprob(m, st, seq({t1})));
    finished += p1;
  }
  const ag::Matrix first = decoder_step_logprobs(m, st, seq({5}));
  finished += std::exp(first(0, kEosId));  // the empty sequence
  EXPECT_NEAR(finished + continuing, 1.0, 1e-10);
}

TEST(ModelConfig, ValidationRejectsBadShapes) {
  ModelConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config(5);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.sigma_init = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace lerptext
