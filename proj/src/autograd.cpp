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

#include "lerptext/autograd.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace lerptext::ag {

Segments Segments::from_lengths(std::span<const int> lengths) {
  Segments s;
  s.offset.reserve(lengths.size());
  s.length.assign(lengths.begin(), lengths.end());
  int off = 0;
  for (int len : lengths) {
    s.offset.push_back(off);
    off += len;
  }
  return s;
}

int Segments::total_rows() const {
  return std::accumulate(length.begin(), length.end(), 0);
}

const Matrix& Var::value() const { return graph_->value(id_); }
const Matrix& Var::grad() const { return graph_->grad(id_); }

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::make(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : inputs) {
      if (nodes_[v.id()].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Graph::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

Matrix& Graph::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::backward(Var out) {
  if (!record_) throw std::logic_error("backward on a non-recording graph");
  if (out.rows() != 1 || out.cols() != 1) {
    throw std::invalid_argument("backward expects a 1x1 output");
  }
  grad(out.id())(0, 0) += 1.0;
  for (int i = out.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, i);
    } else if (n.param != nullptr) {
      n.param->grad += n.grad;
    }
  }
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(a.value() + b.value(), {a, b},
                         [ia, ib](Graph& g, int self) {
                           g.accumulate(ia, g.grad(self));
                           g.accumulate(ib, g.grad(self));
                         });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(a.value() - b.value(), {a, b},
                         [ia, ib](Graph& g, int self) {
                           g.accumulate(ia, g.grad(self));
                           g.accumulate(ib, -g.grad(self));
                         });
}

Var scale(Var a, double c) {
  const int ia = a.id();
  return a.graph()->make(c * a.value(), {a}, [ia, c](Graph& g, int self) {
    g.accumulate(ia, c * g.grad(self));
  });
}

Var add_const(Var a, const Matrix& c) {
  check_same_shape(a.value(), c, "add_const");
  const int ia = a.id();
  return a.graph()->make(a.value() + c, {a}, [ia](Graph& g, int self) {
    g.accumulate(ia, g.grad(self));
  });
}

Var add_row(Var x, Var bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw std::invalid_argument("add_row: bias shape mismatch");
  }
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), ib = bias.id();
  return x.graph()->make(std::move(out), {x, bias},
                         [ix, ib](Graph& g, int self) {
                           const Matrix& d = g.grad(self);
                           g.accumulate(ix, d);
                           if (g.needs_grad(ib)) {
                             g.grad(ib).row(0) += d.colwise().sum();
                           }
                         });
}

Var matmul(Var x, Var w) {
  if (x.cols() != w.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  Matrix out = x.value() * w.value();
  const int ix = x.id(), iw = w.id();
  return x.graph()->make(std::move(out), {x, w}, [ix, iw](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ix)) g.grad(ix).noalias() += d * g.value(iw).transpose();
    if (g.needs_grad(iw)) g.grad(iw).noalias() += g.value(ix).transpose() * d;
  });
}

Var gelu(Var x) {
  const Matrix& v = x.value();
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double z = v.data()[i];
    out.data()[i] = 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluA * z * z * z)));
  }
  const int ix = x.id();
  return x.graph()->make(std::move(out), {x}, [ix](Graph& g, int self) {
    const Matrix& v = g.value(ix);
    const Matrix& d = g.grad(self);
    Matrix dx(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double z = v.data()[i];
      const double t = std::tanh(kGeluC * (z + kGeluA * z * z * z));
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * z * z);
      dx.data()[i] = d.data()[i] * (0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * du);
    }
    g.accumulate(ix, dx);
  });
}

Var softplus(Var x) {
  const Matrix& v = x.value();
  Matrix out = v.unaryExpr([](double z) {
    return z > 30.0 ? z : std::log1p(std::exp(z));
  });
  const int ix = x.id();
  return x.graph()->make(std::move(out), {x}, [ix](Graph& g, int self) {
    Matrix sig = g.value(ix).unaryExpr(
        [](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    g.accumulate(ix, g.grad(self).cwiseProduct(sig));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& v = x.value();
  const Eigen::Index n = v.rows(), d = v.cols();
  auto xhat = std::make_shared<Matrix>(n, d);
  auto rstd = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    (*rstd)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (v.row(r).array() - mu) * (*rstd)(r);
  }
  Matrix out = xhat->array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph()->make(
      std::move(out), {x, gamma, beta},
      [ix, ig, ib, xhat, rstd](Graph& g, int self) {
        const Matrix& dy = g.grad(self);
        if (g.needs_grad(ib)) g.grad(ib).row(0) += dy.colwise().sum();
        if (g.needs_grad(ig)) {
          g.grad(ig).row(0) += dy.cwiseProduct(*xhat).colwise().sum();
        }
        if (g.needs_grad(ix)) {
          const auto gam = g.value(ig).row(0).array();
          Matrix& dx = g.grad(ix);
          for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            RowVector dxh = (dy.row(r).array() * gam).matrix();
            const double m1 = dxh.mean();
            const double m2 = dxh.cwiseProduct(xhat->row(r)).mean();
            dx.row(r).array() +=
                (*rstd)(r) * (dxh.array() - m1 - xhat->row(r).array() * m2);
          }
        }
      });
}

Var slice_rows(Var x, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > x.rows()) {
    throw std::out_of_range("slice_rows: range outside input");
  }
  Matrix out = x.value().middleRows(begin, count);
  const int ix = x.id();
  return x.graph()->make(std::move(out), {x},
                         [ix, begin, count](Graph& g, int self) {
                           if (g.needs_grad(ix)) {
                             g.grad(ix).middleRows(begin, count) += g.grad(self);
                           }
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index n = parts.front().rows();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    if (p.rows() != n) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(n, total);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Graph* graph = parts.front().graph();
  Var out_var = graph->make(
      std::move(out), parts,
      [ids, widths](Graph& g, int self) {
        Eigen::Index col = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
          if (g.needs_grad(ids[i])) {
            g.grad(ids[i]) += g.grad(self).middleCols(col, widths[i]);
          }
          col += widths[i];
        }
      });
  return out_var;
}

Var mix_rows(Var a, Var b, std::span<const double> coef) {
  check_same_shape(a.value(), b.value(), "mix_rows");
  if (static_cast<Eigen::Index>(coef.size()) != a.rows()) {
    throw std::invalid_argument("mix_rows: coefficient count mismatch");
  }
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  Matrix out(va.rows(), va.cols());
  for (Eigen::Index r = 0; r < va.rows(); ++r) {
    const double c = coef[r];
    if (c == 1.0) {
      out.row(r) = va.row(r);
    } else if (c == 0.0) {
      out.row(r) = vb.row(r);
    } else {
      out.row(r) = c * va.row(r) + (1.0 - c) * vb.row(r);
    }
  }
  std::vector<double> cs(coef.begin(), coef.end());
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(std::move(out), {a, b},
                         [ia, ib, cs = std::move(cs)](Graph& g, int self) {
                           const Matrix& d = g.grad(self);
                           for (Eigen::Index r = 0; r < d.rows(); ++r) {
                             if (g.needs_grad(ia)) g.grad(ia).row(r) += cs[r] * d.row(r);
                             if (g.needs_grad(ib)) {
                               g.grad(ib).row(r) += (1.0 - cs[r]) * d.row(r);
                             }
                           }
                         });
}

Var embedding(Var table, std::span<const int> ids) {
  const Matrix& t = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[i]) +
                              " outside table of " + std::to_string(t.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  const int it = table.id();
  return table.graph()->make(std::move(out), {table},
                             [it, idv = std::move(idv)](Graph& g, int self) {
                               Matrix& dt = g.grad(it);
                               const Matrix& d = g.grad(self);
                               for (size_t i = 0; i < idv.size(); ++i) {
                                 dt.row(idv[i]) += d.row(static_cast<Eigen::Index>(i));
                               }
                             });
}

Var segment_mean(Var x, const Segments& seg) {
  const Matrix& v = x.value();
  Matrix out(seg.count(), v.cols());
  for (int s = 0; s < seg.count(); ++s) {
    if (seg.length[s] <= 0) throw std::invalid_argument("segment_mean: empty segment");
    out.row(s) = v.middleRows(seg.offset[s], seg.length[s]).colwise().mean();
  }
  const int ix = x.id();
  return x.graph()->make(std::move(out), {x}, [ix, seg](Graph& g, int self) {
    if (!g.needs_grad(ix)) return;
    Matrix& dx = g.grad(ix);
    const Matrix& d = g.grad(self);
    for (int s = 0; s < seg.count(); ++s) {
      const double inv = 1.0 / seg.length[s];
      for (int r = 0; r < seg.length[s]; ++r) dx.row(seg.offset[s] + r) += inv * d.row(s);
    }
  });
}

Var attention(Var q, Var k, Var v, const Segments& qseg, const Segments& kseg,
              std::span<const int> q_to_k, int heads, bool causal) {
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  const Eigen::Index d = Q.cols();
  if (K.cols() != d || V.cols() != d || K.rows() != V.rows()) {
    throw std::invalid_argument("attention: q/k/v shape mismatch");
  }
  if (heads <= 0 || d % heads != 0) {
    throw std::invalid_argument("attention: head count must divide width");
  }
  if (static_cast<int>(q_to_k.size()) != qseg.count()) {
    throw std::invalid_argument("attention: segment map size mismatch");
  }
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(static_cast<size_t>(qseg.count() * heads));
  Matrix out = Matrix::Zero(Q.rows(), d);
  std::vector<int> map(q_to_k.begin(), q_to_k.end());
  for (int s = 0; s < qseg.count(); ++s) {
    const int ks = map[s];
    const int qo = qseg.offset[s], ql = qseg.length[s];
    const int ko = kseg.offset[ks], kl = kseg.length[ks];
    for (int h = 0; h < heads; ++h) {
      Matrix S = Q.block(qo, h * dh, ql, dh) * K.block(ko, h * dh, kl, dh).transpose();
      S *= inv_sqrt;
      if (causal) {
        for (int i = 0; i < ql; ++i) {
          for (int j = i + 1; j < kl; ++j) S(i, j) = -std::numeric_limits<double>::infinity();
        }
      }
      for (int i = 0; i < ql; ++i) {
        const double mx = S.row(i).maxCoeff();
        S.row(i) = (S.row(i).array() - mx).exp();
        S.row(i) /= S.row(i).sum();
      }
      out.block(qo, h * dh, ql, dh).noalias() = S * V.block(ko, h * dh, kl, dh);
      probs->push_back(std::move(S));
    }
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return q.graph()->make(
      std::move(out), {q, k, v},
      [iq, ik, iv, qseg, kseg, map = std::move(map), probs, heads, dh,
       inv_sqrt](Graph& g, int self) {
        const Matrix& dO = g.grad(self);
        const Matrix& Q = g.value(iq);
        const Matrix& K = g.value(ik);
        const Matrix& V = g.value(iv);
        const bool gq = g.needs_grad(iq), gk = g.needs_grad(ik), gv = g.needs_grad(iv);
        size_t p = 0;
        for (int s = 0; s < qseg.count(); ++s) {
          const int ks = map[s];
          const int qo = qseg.offset[s], ql = qseg.length[s];
          const int ko = kseg.offset[ks], kl = kseg.length[ks];
          for (int h = 0; h < heads; ++h, ++p) {
            const Matrix& P = (*probs)[p];
            auto dOb = dO.block(qo, h * dh, ql, dh);
            if (gv) g.grad(iv).block(ko, h * dh, kl, dh).noalias() += P.transpose() * dOb;
            Matrix dP = dOb * V.block(ko, h * dh, kl, dh).transpose();
            Eigen::VectorXd rs = dP.cwiseProduct(P).rowwise().sum();
            Matrix dS = P.cwiseProduct(dP.colwise() - rs) * inv_sqrt;
            if (gq) g.grad(iq).block(qo, h * dh, ql, dh).noalias() += dS * K.block(ko, h * dh, kl, dh);
            if (gk) {
              g.grad(ik).block(ko, h * dh, kl, dh).noalias() +=
                  dS.transpose() * Q.block(qo, h * dh, ql, dh);
            }
          }
        }
      });
}

Matrix length_weights(int length, int target_length, double sigma) {
  if (length < 1 || target_length < 1) {
    throw std::invalid_argument("length_weights: lengths must be positive");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("length_weights: sigma must be positive");
  const double ratio = static_cast<double>(length) / target_length;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix w(target_length, length);
  for (int j = 1; j <= target_length; ++j) {
    const double center = ratio * j;
    for (int k = 1; k <= length; ++k) {
      const double diff = k - center;
      w(j - 1, k - 1) = -inv * diff * diff;
    }
    const double mx = w.row(j - 1).maxCoeff();
    w.row(j - 1) = (w.row(j - 1).array() - mx).exp();
    w.row(j - 1) /= w.row(j - 1).sum();
  }
  return w;
}

Var length_convert(Var h, Var sigma, const Segments& in,
                   std::span<const int> target) {
  if (static_cast<int>(target.size()) != in.count()) {
    throw std::invalid_argument("length_convert: target count mismatch");
  }
  if (sigma.rows() != 1 || sigma.cols() != 1) {
    throw std::invalid_argument("length_convert: sigma must be 1x1");
  }
  const double sg = sigma.scalar();
  const Matrix& H = h.value();
  std::vector<int> tl(target.begin(), target.end());
  Segments out_seg = Segments::from_lengths(tl);
  auto weights = std::make_shared<std::vector<Matrix>>();
  Matrix out(out_seg.total_rows(), H.cols());
  for (int s = 0; s < in.count(); ++s) {
    weights->push_back(length_weights(in.length[s], tl[s], sg));
    out.middleRows(out_seg.offset[s], tl[s]).noalias() =
        weights->back() * H.middleRows(in.offset[s], in.length[s]);
  }
  const int ih = h.id(), is = sigma.id();
  return h.graph()->make(
      std::move(out), {h, sigma},
      [ih, is, in, out_seg, weights, sg](Graph& g, int self) {
        const Matrix& dO = g.grad(self);
        const Matrix& H = g.value(ih);
        double dsigma = 0.0;
        for (int s = 0; s < in.count(); ++s) {
          const Matrix& W = (*weights)[s];
          auto dOs = dO.middleRows(out_seg.offset[s], out_seg.length[s]);
          auto Hs = H.middleRows(in.offset[s], in.length[s]);
          if (g.needs_grad(ih)) {
            g.grad(ih).middleRows(in.offset[s], in.length[s]).noalias() += W.transpose() * dOs;
          }
          if (g.needs_grad(is)) {
            Matrix dW = dOs * Hs.transpose();
            Eigen::VectorXd rs = dW.cwiseProduct(W).rowwise().sum();
            Matrix dA = W.cwiseProduct(dW.colwise() - rs);
            const int L = in.length[s], Lt = out_seg.length[s];
            const double ratio = static_cast<double>(L) / Lt;
            for (int j = 1; j <= Lt; ++j) {
              for (int k = 1; k <= L; ++k) {
                const double diff = k - ratio * j;
                dsigma += dA(j - 1, k - 1) * diff * diff / (sg * sg * sg);
              }
            }
          }
        }
        if (g.needs_grad(is)) g.grad(is)(0, 0) += dsigma;
      });
}

Var sum_squares(Var x, double c) {
  Matrix out(1, 1);
  out(0, 0) = c * x.value().squaredNorm();
  const int ix = x.id();
  return x.graph()->make(std::move(out), {x}, [ix, c](Graph& g, int self) {
    g.accumulate(ix, (2.0 * c * g.grad(self)(0, 0)) * g.value(ix));
  });
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Var weighted_nll(Var logits, std::span<const int> target,
                 std::span<const double> weight,
                 std::vector<double>* row_logprob) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(target.size()) != n ||
      static_cast<Eigen::Index>(weight.size()) != n) {
    throw std::invalid_argument("weighted_nll: target/weight count mismatch");
  }
  auto lsm = std::make_shared<Matrix>(log_softmax_rows(logits.value()));
  if (row_logprob) row_logprob->resize(static_cast<size_t>(n));
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (target[r] < 0 || target[r] >= lsm->cols()) {
      throw std::out_of_range("weighted_nll: target id outside vocabulary");
    }
    const double lp = (*lsm)(r, target[r]);
    if (row_logprob) (*row_logprob)[r] = lp;
    loss -= weight[r] * lp;
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> t(target.begin(), target.end());
  std::vector<double> w(weight.begin(), weight.end());
  const int il = logits.id();
  return logits.graph()->make(
      std::move(out), {logits},
      [il, lsm, t = std::move(t), w = std::move(w)](Graph& g, int self) {
        const double up = g.grad(self)(0, 0);
        Matrix& dl = g.grad(il);
        for (Eigen::Index r = 0; r < lsm->rows(); ++r) {
          if (w[r] == 0.0) continue;
          dl.row(r) += (up * w[r]) * lsm->row(r).array().exp().matrix();
          dl(r, t[r]) -= up * w[r];
        }
      });
}

Var soft_cross_entropy(Var logits, const Matrix& target,
                       std::span<const double> weight) {
  check_same_shape(logits.value(), target, "soft_cross_entropy");
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(weight.size()) != n) {
    throw std::invalid_argument("soft_cross_entropy: weight count mismatch");
  }
  auto lsm = std::make_shared<Matrix>(log_softmax_rows(logits.value()));
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    loss -= weight[r] * target.row(r).dot(lsm->row(r));
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<double> w(weight.begin(), weight.end());
  const int il = logits.id();
  return logits.graph()->make(
      std::move(out), {logits},
      [il, lsm, target, w = std::move(w)](Graph& g, int self) {
        const double up = g.grad(self)(0, 0);
        Matrix& dl = g.grad(il);
        for (Eigen::Index r = 0; r < lsm->rows(); ++r) {
          const double mass = target.row(r).sum();
          dl.row(r) += (up * w[r]) *
                       (mass * lsm->row(r).array().exp() - target.row(r).array()).matrix();
        }
      });
}

}  // namespace lerptext::ag
