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

#include <functional>
#include <random>

#include "lerptext/autograd.hpp"
#include "test_util.hpp"

namespace lerptext::ag {
namespace {

using lerptext::testing::rel_error;

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Compares backward() against central differences on every entry of every
// parameter. `f` must build a 1x1 output on the given graph.
void check_gradients(std::vector<Parameter*> params, const std::function<Var(Graph&)>& f,
                     double tol = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    Graph g(true);
    Var out = f(g);
    ASSERT_EQ(out.rows(), 1);
    ASSERT_EQ(out.cols(), 1);
    g.backward(out);
  }
  const double h = 1e-6;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      Graph gp(false);
      const double up = f(gp).scalar();
      p->value.data()[i] = saved - h;
      Graph gm(false);
      const double down = f(gm).scalar();
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      EXPECT_LT(rel_error(p->grad.data()[i], numeric), tol)
          << p->name << "[" << i << "] analytic " << p->grad.data()[i] << " numeric " << numeric;
    }
  }
}

// Nonlinear scalar read-out so every output entry gets a distinct weight.
Var readout(Var y, const Matrix& offset) { return sum_squares(add_const(y, offset), 0.5); }

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{7};
};

TEST_F(OpGradients, ElementwiseAndLinear) {
  Parameter a("a", random_matrix(rng, 3, 4));
  Parameter b("b", random_matrix(rng, 3, 4));
  Parameter w("w", random_matrix(rng, 4, 2));
  Parameter bias("bias", random_matrix(rng, 1, 2));
  const Matrix off = random_matrix(rng, 3, 2);
  check_gradients({&a, &b, &w, &bias}, [&](Graph& g) {
    Var x = sub(add(g.param(a), scale(g.param(b), 0.7)), gelu(g.param(b)));
    Var y = add_row(matmul(softplus(x), g.param(w)), g.param(bias));
    return readout(y, off);
  });
}

TEST_F(OpGradients, LayerNorm) {
  Parameter x("x", random_matrix(rng, 3, 5));
  Parameter gamma("gamma", random_matrix(rng, 1, 5));
  Parameter beta("beta", random_matrix(rng, 1, 5));
  const Matrix off = random_matrix(rng, 3, 5);
  check_gradients({&x, &gamma, &beta}, [&](Graph& g) {
    return readout(layer_norm(g.param(x), g.param(gamma), g.param(beta)), off);
  });
}

TEST_F(OpGradients, SliceConcatMix) {
  Parameter a("a", random_matrix(rng, 4, 3));
  Parameter b("b", random_matrix(rng, 4, 2));
  Parameter c("c", random_matrix(rng, 2, 5));
  const std::vector<double> coef = {0.0, 0.25, 1.0, 0.6};
  const Matrix off = random_matrix(rng, 2, 5);
  check_gradients({&a, &b, &c}, [&](Graph& g) {
    std::vector<Var> parts = {g.param(a), g.param(b)};
    Var cat = concat_cols(parts);  // 4 x 5
    Var top = slice_rows(cat, 0, 2);
    Var bottom = slice_rows(cat, 2, 2);
    Var mixed = mix_rows(top, g.param(c), std::span<const double>(coef.data(), 2));
    Var mixed2 = mix_rows(bottom, mixed, std::span<const double>(coef.data() + 2, 2));
    return readout(mixed2, off);
  });
}

TEST_F(OpGradients, EmbeddingAndSegmentMean) {
  Parameter table("table", random_matrix(rng, 6, 3));
  const std::vector<int> ids = {1, 4, 4, 0, 5};
  const std::vector<int> lengths = {2, 3};
  const Matrix off = random_matrix(rng, 2, 3);
  check_gradients({&table}, [&](Graph& g) {
    Var e = embedding(g.param(table), ids);
    return readout(segment_mean(e, Segments::from_lengths(lengths)), off);
  });
}

TEST_F(OpGradients, CrossAttention) {
  Parameter q("q", random_matrix(rng, 5, 4));
  Parameter k("k", random_matrix(rng, 6, 4));
  Parameter v("v", random_matrix(rng, 6, 4));
  const std::vector<int> qlen = {2, 3};
  const std::vector<int> klen = {4, 2};
  const std::vector<int> map = {1, 0};
  const Matrix off = random_matrix(rng, 5, 4);
  check_gradients({&q, &k, &v}, [&](Graph& g) {
    return readout(attention(g.param(q), g.param(k), g.param(v), Segments::from_lengths(qlen),
                             Segments::from_lengths(klen), map, 2, false),
                   off);
  });
}

TEST_F(OpGradients, CausalSelfAttention) {
  Parameter x("x", random_matrix(rng, 5, 4));
  Parameter wq("wq", random_matrix(rng, 4, 4));
  const std::vector<int> len = {3, 2};
  const std::vector<int> map = {0, 1};
  const Matrix off = random_matrix(rng, 5, 4);
  check_gradients({&x, &wq}, [&](Graph& g) {
    Var xv = g.param(x);
    Var qv = matmul(xv, g.param(wq));
    auto seg = Segments::from_lengths(len);
    return readout(attention(qv, xv, xv, seg, seg, map, 2, true), off);
  });
}

TEST_F(OpGradients, LengthConvertIncludingSpread) {
  Parameter h("h", random_matrix(rng, 7, 3));
  Parameter raw("raw", Matrix::Constant(1, 1, 0.3));
  const std::vector<int> len = {4, 3};
  const std::vector<int> target = {2, 5};
  const Matrix off = random_matrix(rng, 7, 3);
  check_gradients({&h, &raw}, [&](Graph& g) {
    Var sigma = softplus(g.param(raw));
    return readout(length_convert(g.param(h), sigma, Segments::from_lengths(len), target), off);
  });
}

TEST_F(OpGradients, WeightedNllAndSoftCrossEntropy) {
  Parameter z("z", random_matrix(rng, 4, 5));
  const std::vector<int> target = {0, 3, 4, 1};
  const std::vector<double> w = {0.2, 1.0, 0.0, 0.7};
  Matrix soft(4, 5);
  soft << 0.2, 0.2, 0.2, 0.2, 0.2, 1, 0, 0, 0, 0, 0, 0.5, 0.5, 0, 0, 0.1, 0.2, 0.3, 0.4, 0;
  check_gradients({&z}, [&](Graph& g) {
    return add(weighted_nll(g.param(z), target, w), soft_cross_entropy(g.param(z), soft, w));
  });
}

TEST(LengthWeights, MatchesHandEvaluatedSoftmax) {
  // L = 3, target 2, sigma 1; centers at 1.5 and 3.0 on 1-based positions.
  const Matrix w = length_weights(3, 2, 1.0);
  const double expected[2][3] = {{0.4223187982515182, 0.4223187982515182, 0.1553624034969636},
                                 {0.0776955791485706, 0.3482074278837349, 0.5740969929676946}};
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(w(j, k), expected[j][k], 1e-12);
  }
}

TEST(LengthWeights, BruteForceOracleOnGrid) {
  for (int L = 1; L <= 12; ++L) {
    for (int T = 1; T <= 12; ++T) {
      for (double sigma : {0.3, 1.0, 4.0}) {
        const Matrix w = length_weights(L, T, sigma);
        for (int j = 1; j <= T; ++j) {
          std::vector<double> e(L);
          double total = 0;
          for (int k = 1; k <= L; ++k) {
            const double d = k - static_cast<double>(L) / T * j;
            e[k - 1] = std::exp(-d * d / (2 * sigma * sigma));
            total += e[k - 1];
          }
          for (int k = 1; k <= L; ++k) {
            ASSERT_NEAR(w(j - 1, k - 1), e[k - 1] / total, 1e-12) << L << " " << T << " " << sigma;
          }
        }
      }
    }
  }
}

TEST(Graph, ConstantsReceiveNoGradient) {
  Parameter p("p", Matrix::Constant(1, 1, 2.0));
  Graph g(true);
  Var c = g.constant(Matrix::Constant(1, 1, 3.0));
  Var out = sum_squares(add(g.param(p), c));
  g.backward(out);
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 10.0);  // d/dp (p + 3)^2 at p = 2
}

TEST(Graph, MixRowsExactAtEndpoints) {
  Graph g(false);
  Matrix a(2, 3), b(2, 3);
  a << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  b << 1.1, 1.2, 1.3, 1.4, 1.5, 1.6;
  const std::vector<double> coef = {1.0, 0.0};
  Var m = mix_rows(g.constant(a), g.constant(b), coef);
  EXPECT_TRUE(m.value().row(0) == a.row(0));
  EXPECT_TRUE(m.value().row(1) == b.row(1));
}

}  // namespace
}  // namespace lerptext::ag
