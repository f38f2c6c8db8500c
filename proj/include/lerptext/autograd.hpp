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

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lerptext::ag {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A named trainable array. Recording graphs accumulate into `grad`; it is
/// scratch state rather than part of the parameter's value, hence mutable.
struct Parameter {
  std::string name;
  Matrix value;
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

/// Row layout of a packed batch of variable-length sequences. Sequence `i`
/// occupies rows [offset[i], offset[i] + length[i]).
struct Segments {
  std::vector<int> offset;
  std::vector<int> length;

  static Segments from_lengths(std::span<const int> lengths);
  int count() const { return static_cast<int>(length.size()); }
  int total_rows() const;
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; only valid while the graph
/// that created it is alive.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Graph* graph() const { return graph_; }
  int id() const { return id_; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Tape for reverse-mode differentiation. Nodes are appended in topological
/// order, so backward is a single reverse sweep. With `record == false`
/// no backward closures are kept and the graph is a plain evaluator.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var param(const Parameter& p);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates to every
  /// parameter leaf reachable from it.
  void backward(Var out);

  // Low-level node construction for op implementations.
  using BackwardFn = std::function<void(Graph&, int self)>;
  Var make(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  Var make(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return make(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
  }
  const Matrix& value(int id) const;
  Matrix& grad(int id);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  /// Adds `g` into the gradient of node `id` (allocates on first use).
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[id];
    if (!n.needs_grad) return;
    Matrix& dst = grad(id);
    dst += g;
  }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    const Parameter* param = nullptr;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool record_;
};

// Elementwise / structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, const Matrix& c);
Var add_row(Var x, Var bias);  // bias is 1 x cols, broadcast over rows
Var matmul(Var x, Var w);      // [n x k] * [k x m]
Var gelu(Var x);
Var softplus(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var slice_rows(Var x, int begin, int count);
Var concat_cols(std::span<const Var> parts);

/// out_r = coef[r] * a_r + (1 - coef[r]) * b_r. Rows with coef exactly 1 or
/// 0 copy the chosen side bit-for-bit.
Var mix_rows(Var a, Var b, std::span<const double> coef);

/// Gathers rows of `table` by id.
Var embedding(Var table, std::span<const int> ids);

/// Mean over the rows of each segment; result has one row per segment.
Var segment_mean(Var x, const Segments& seg);

/// Scaled dot-product attention over packed segments. Query segment `s`
/// attends to key segment `q_to_k[s]`. Heads split the columns evenly.
Var attention(Var q, Var k, Var v, const Segments& qseg, const Segments& kseg,
              std::span<const int> q_to_k, int heads, bool causal);

/// Location-based length resampling. Segment `s` of `h` (length L) is
/// mapped to `target[s]` rows with softmax weights over logits
/// -(k - (L / Lt) * j)^2 / (2 sigma^2), k and j 1-based. `sigma` is 1x1.
Var length_convert(Var h, Var sigma, const Segments& in,
                   std::span<const int> target);

/// Sum of squared entries times `c`, as a 1x1 node.
Var sum_squares(Var x, double c = 1.0);

/// -sum_r weight[r] * log softmax(logits_r)[target[r]] as a 1x1 node.
/// Optionally reports the per-row log-probabilities.
Var weighted_nll(Var logits, std::span<const int> target,
                 std::span<const double> weight,
                 std::vector<double>* row_logprob = nullptr);

/// -sum_r weight[r] * sum_c target(r, c) * log softmax(logits_r)[c].
Var soft_cross_entropy(Var logits, const Matrix& target,
                       std::span<const double> weight);

/// Row-wise log-softmax on a plain matrix (no graph).
Matrix log_softmax_rows(const Matrix& logits);

/// Softmax weights of the location-based length converter, Lt x L.
Matrix length_weights(int length, int target_length, double sigma);

}  // namespace lerptext::ag
