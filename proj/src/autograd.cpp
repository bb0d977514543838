// Copyright (c) 2026 The MFCon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mfcon/autograd.hpp"

#include <cmath>
#include <string>

#include "mfcon/errors.hpp"
#include "mfcon/random.hpp"

namespace mfcon::ag {

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Param& p) {
  if (!p.trainable) return constant(p.value);
  Param* target = &p;
  nodes_.push_back(Node{p.value, Matrix(), true,
                        [target](const Matrix& g, const Matrix&) {
                          if (target->grad.size() == 0) {
                            target->grad = g;
                          } else {
                            target->grad += g;
                          }
                        }});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return record(std::move(value),
                std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || needs_grad(v);
  nodes_.push_back(
      Node{std::move(value), Matrix(), needs, needs ? std::move(fn) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var v, const Matrix& seed) {
  const std::pair<Var, Matrix> s{v, seed};
  backward(std::span<const std::pair<Var, Matrix>>(&s, 1));
}

void Tape::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  int top = -1;
  for (const auto& [v, g] : seeds) {
    if (v.tape_ != this) throw ShapeError("seed var belongs to another tape");
    if (g.rows() != value(v).rows() || g.cols() != value(v).cols()) {
      throw ShapeError("seed gradient shape mismatch");
    }
    accumulate(v, g);
    top = std::max(top, v.id_);
  }
  for (int i = top; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(n.grad, n.value);
  }
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

void check_segments(const Matrix& x, int seg_len, const char* op) {
  if (seg_len < 1 || x.rows() % seg_len != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(x.rows()) +
                     " rows are not a multiple of segment length " +
                     std::to_string(seg_len));
  }
}

}  // namespace

Var linear(Var x, Var w, Var b) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  if (xv.cols() != wv.rows()) {
    throw ShapeError("linear: input has " + std::to_string(xv.cols()) +
                     " columns, weight expects " + std::to_string(wv.rows()));
  }
  Matrix y;
  y.noalias() = xv * wv;
  if (b.valid()) {
    if (b.value().rows() != 1 || b.value().cols() != wv.cols()) {
      throw ShapeError("linear: bias shape mismatch");
    }
    y.rowwise() += b.value().row(0);
  }
  return t->record(std::move(y), {x, w, b}, [t, x, w, b](const Matrix& g, const Matrix&) {
    if (t->needs_grad(x)) t->accumulate(x, g * t->value(w).transpose());
    if (t->needs_grad(w)) t->accumulate(w, t->value(x).transpose() * g);
    if (t->needs_grad(b)) t->accumulate(b, g.colwise().sum());
  });
}

Var add(Var a, Var b) {
  Tape* t = a.tape();
  check_same_shape(a.value(), b.value(), "add");
  return t->record(a.value() + b.value(), {a, b}, [t, a, b](const Matrix& g, const Matrix&) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var add_scaled(Var a, Var b, double alpha) {
  Tape* t = a.tape();
  check_same_shape(a.value(), b.value(), "add_scaled");
  return t->record(a.value() + alpha * b.value(), {a, b},
                   [t, a, b, alpha](const Matrix& g, const Matrix&) {
                     t->accumulate(a, g);
                     t->accumulate(b, alpha * g);
                   });
}

Var scale(Var a, double alpha) {
  Tape* t = a.tape();
  return t->record(alpha * a.value(), {a}, [t, a, alpha](const Matrix& g, const Matrix&) {
    t->accumulate(a, alpha * g);
  });
}

Var relu(Var x) {
  Tape* t = x.tape();
  return t->record(x.value().cwiseMax(0.0), {x}, [t, x](const Matrix& g, const Matrix&) {
    t->accumulate(x, (t->value(x).array() > 0.0).select(g, 0.0));
  });
}

Var silu(Var x) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  Matrix s = (1.0 + (-xv.array()).exp()).inverse().matrix();
  Matrix y = xv.cwiseProduct(s);
  return t->record(std::move(y), {x},
                   [t, x, s = std::move(s)](const Matrix& g, const Matrix&) {
                     const auto& xa = t->value(x).array();
                     t->accumulate(
                         x, (g.array() * s.array() *
                             (1.0 + xa * (1.0 - s.array())))
                                .matrix());
                   });
}

Var tanh(Var x) {
  Tape* t = x.tape();
  Matrix y = x.value().array().tanh().matrix();
  return t->record(std::move(y), {x}, [t, x](const Matrix& g, const Matrix& y) {
    t->accumulate(x, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(Var x) {
  Tape* t = x.tape();
  Matrix y = (1.0 + (-x.value().array()).exp()).inverse().matrix();
  Matrix d = y.array() * (1.0 - y.array());
  return t->record(std::move(y), {x},
                   [t, x, d = std::move(d)](const Matrix& g, const Matrix&) {
                     t->accumulate(x, g.cwiseProduct(d));
                   });
}

Var glu(Var x) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  if (xv.cols() % 2 != 0) throw ShapeError("glu: odd channel count");
  const Eigen::Index c = xv.cols() / 2;
  Matrix s = (1.0 + (-xv.rightCols(c).array()).exp()).inverse().matrix();
  Matrix y = xv.leftCols(c).cwiseProduct(s);
  return t->record(
      std::move(y), {x}, [t, x, c, s = std::move(s)](const Matrix& g, const Matrix&) {
        const Matrix& xv = t->value(x);
        Matrix dx(g.rows(), 2 * c);
        dx.leftCols(c) = g.cwiseProduct(s);
        dx.rightCols(c) = (g.array() * xv.leftCols(c).array() * s.array() *
                           (1.0 - s.array()))
                              .matrix();
        t->accumulate(x, dx);
      });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c) {
    throw ShapeError("layer_norm: parameter width mismatch");
  }
  Matrix xhat(n, c);
  Vector inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array())
                 .rowwise() +
             beta.value().row(0).array();
  return t->record(
      std::move(y), {x, gamma, beta},
      [t, x, gamma, beta, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const Matrix& g, const Matrix&) {
        if (t->needs_grad(gamma)) {
          t->accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        }
        if (t->needs_grad(beta)) t->accumulate(beta, g.colwise().sum());
        if (!t->needs_grad(x)) return;
        Matrix dxhat = g.array().rowwise() * t->value(gamma).row(0).array();
        const Vector m1 = dxhat.rowwise().mean();
        const Vector m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
        Matrix dx = dxhat;
        dx.colwise() -= m1;
        dx -= (xhat.array().colwise() * m2.array()).matrix();
        dx = dx.array().colwise() * inv_std.array();
        t->accumulate(x, dx);
      });
}

Var batch_norm(Var x, Var gamma, Var beta, const BatchNormState& st) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c ||
      st.running_mean == nullptr || st.running_var == nullptr ||
      st.running_mean->size() != c || st.running_var->size() != c) {
    throw ShapeError("batch_norm: parameter width mismatch");
  }
  RowVector mean, var;
  if (st.train) {
    if (st.running_mean_out == nullptr || st.running_var_out == nullptr) {
      throw ShapeError("batch_norm: train mode needs writable statistics");
    }
    mean = xv.colwise().mean();
    var = (xv.rowwise() - mean).array().square().colwise().mean();
    const double unbias = n > 1 ? static_cast<double>(n) / (n - 1) : 1.0;
    Matrix& rm = *st.running_mean_out;
    Matrix& rv = *st.running_var_out;
    rm = (1.0 - st.momentum) * rm + st.momentum * mean;
    rv = (1.0 - st.momentum) * rv + st.momentum * unbias * var;
  } else {
    mean = st.running_mean->row(0);
    var = st.running_var->row(0);
  }
  RowVector inv_std = (var.array() + st.eps).rsqrt();
  Matrix xhat = (xv.rowwise() - mean).array().rowwise() * inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array())
                 .rowwise() +
             beta.value().row(0).array();
  const bool train = st.train;
  return t->record(
      std::move(y), {x, gamma, beta},
      [t, x, gamma, beta, train, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const Matrix& g, const Matrix&) {
        if (t->needs_grad(gamma)) {
          t->accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        }
        if (t->needs_grad(beta)) t->accumulate(beta, g.colwise().sum());
        if (!t->needs_grad(x)) return;
        Matrix dxhat = g.array().rowwise() * t->value(gamma).row(0).array();
        if (train) {
          const RowVector m1 = dxhat.colwise().mean();
          const RowVector m2 = dxhat.cwiseProduct(xhat).colwise().mean();
          dxhat.rowwise() -= m1;
          dxhat -= (xhat.array().rowwise() * m2.array()).matrix();
        }
        t->accumulate(x, (dxhat.array().rowwise() * inv_std.array()).matrix());
      });
}

Var dropout(Var x, double p, uint64_t seed) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  Rng rng(seed);
  Matrix mask(xv.rows(), xv.cols());
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = uniform(rng) < p ? 0.0 : keep;
  }
  Matrix y = xv.cwiseProduct(mask);
  return t->record(std::move(y), {x},
                   [t, x, mask = std::move(mask)](const Matrix& g, const Matrix&) {
                     t->accumulate(x, g.cwiseProduct(mask));
                   });
}

int conv_out_len(int in_len, int kernel, int stride, int pad) {
  return (in_len + 2 * pad - kernel) / stride + 1;
}

Var im2col(Var x, int seg_len, int kernel, int stride, int pad) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  check_segments(xv, seg_len, "im2col");
  const int out_len = conv_out_len(seg_len, kernel, stride, pad);
  if (out_len < 1) throw LengthError("im2col: segment too short for kernel");
  const Eigen::Index segs = xv.rows() / seg_len, c = xv.cols();
  Matrix y = Matrix::Zero(segs * out_len, kernel * c);
  for (Eigen::Index s = 0; s < segs; ++s) {
    for (int o = 0; o < out_len; ++o) {
      for (int j = 0; j < kernel; ++j) {
        const int src = o * stride + j - pad;
        if (src < 0 || src >= seg_len) continue;
        y.block(s * out_len + o, j * c, 1, c) = xv.row(s * seg_len + src);
      }
    }
  }
  return t->record(
      std::move(y), {x},
      [t, x, seg_len, kernel, stride, pad, out_len, segs, c](const Matrix& g, const Matrix&) {
        Matrix dx = Matrix::Zero(segs * seg_len, c);
        for (Eigen::Index s = 0; s < segs; ++s) {
          for (int o = 0; o < out_len; ++o) {
            for (int j = 0; j < kernel; ++j) {
              const int src = o * stride + j - pad;
              if (src < 0 || src >= seg_len) continue;
              dx.row(s * seg_len + src) += g.block(s * out_len + o, j * c, 1, c);
            }
          }
        }
        t->accumulate(x, dx);
      });
}

Var depthwise_conv(Var x, Var w, Var b, int seg_len) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  check_segments(xv, seg_len, "depthwise_conv");
  const int k = static_cast<int>(wv.rows());
  if (wv.cols() != xv.cols() || k % 2 == 0) {
    throw ShapeError("depthwise_conv: weight must be odd-kernel x channels");
  }
  const int pad = k / 2;
  const Eigen::Index segs = xv.rows() / seg_len;
  Matrix y(xv.rows(), xv.cols());
  if (b.valid()) {
    y.rowwise() = b.value().row(0);
  } else {
    y.setZero();
  }
  for (Eigen::Index s = 0; s < segs; ++s) {
    const Eigen::Index base = s * seg_len;
    for (int j = 0; j < k; ++j) {
      const int shift = j - pad;
      const int lo = std::max(0, -shift), hi = std::min(seg_len, seg_len - shift);
      if (hi <= lo) continue;
      y.middleRows(base + lo, hi - lo) +=
          (xv.middleRows(base + lo + shift, hi - lo).array().rowwise() *
           wv.row(j).array())
              .matrix();
    }
  }
  return t->record(
      std::move(y), {x, w, b}, [t, x, w, b, seg_len, segs, k, pad](const Matrix& g, const Matrix&) {
        const Matrix& xv = t->value(x);
        const Matrix& wv = t->value(w);
        Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
        Matrix dw = Matrix::Zero(wv.rows(), wv.cols());
        for (Eigen::Index s = 0; s < segs; ++s) {
          const Eigen::Index base = s * seg_len;
          for (int j = 0; j < k; ++j) {
            const int shift = j - pad;
            const int lo = std::max(0, -shift),
                      hi = std::min(seg_len, seg_len - shift);
            if (hi <= lo) continue;
            const auto gs = g.middleRows(base + lo, hi - lo);
            const auto xs = xv.middleRows(base + lo + shift, hi - lo);
            dx.middleRows(base + lo + shift, hi - lo) +=
                (gs.array().rowwise() * wv.row(j).array()).matrix();
            dw.row(j) += gs.cwiseProduct(xs).colwise().sum();
          }
        }
        t->accumulate(x, dx);
        t->accumulate(w, dw);
        if (t->needs_grad(b)) t->accumulate(b, g.colwise().sum());
      });
}

Var attention(Var q, Var k, Var v, int heads, int seg_len) {
  Tape* t = q.tape();
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  check_same_shape(qv, kv, "attention");
  check_same_shape(qv, vv, "attention");
  check_segments(qv, seg_len, "attention");
  if (heads < 1 || qv.cols() % heads != 0) {
    throw ShapeError("attention: width not divisible by heads");
  }
  const Eigen::Index segs = qv.rows() / seg_len;
  const Eigen::Index dk = qv.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  // probs[s * heads + h] is seg_len x seg_len.
  std::vector<Matrix> probs(segs * heads);
  Matrix y(qv.rows(), qv.cols());
  for (Eigen::Index s = 0; s < segs; ++s) {
    for (int h = 0; h < heads; ++h) {
      const auto qs = qv.block(s * seg_len, h * dk, seg_len, dk);
      const auto ks = kv.block(s * seg_len, h * dk, seg_len, dk);
      const auto vs = vv.block(s * seg_len, h * dk, seg_len, dk);
      Matrix& p = probs[s * heads + h];
      p.noalias() = inv_sqrt * (qs * ks.transpose());
      for (Eigen::Index r = 0; r < seg_len; ++r) {
        const double mx = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
      }
      y.block(s * seg_len, h * dk, seg_len, dk).noalias() = p * vs;
    }
  }
  return t->record(
      std::move(y), {q, k, v},
      [t, q, k, v, heads, seg_len, segs, dk, inv_sqrt,
       probs = std::move(probs)](const Matrix& g, const Matrix&) {
        const Matrix& qv = t->value(q);
        const Matrix& kv = t->value(k);
        const Matrix& vv = t->value(v);
        Matrix dq(qv.rows(), qv.cols()), dkm(qv.rows(), qv.cols()),
            dv(qv.rows(), qv.cols());
        Matrix dp, ds;
        for (Eigen::Index s = 0; s < segs; ++s) {
          for (int h = 0; h < heads; ++h) {
            const Matrix& p = probs[s * heads + h];
            const auto gs = g.block(s * seg_len, h * dk, seg_len, dk);
            const auto qs = qv.block(s * seg_len, h * dk, seg_len, dk);
            const auto ks = kv.block(s * seg_len, h * dk, seg_len, dk);
            const auto vs = vv.block(s * seg_len, h * dk, seg_len, dk);
            dv.block(s * seg_len, h * dk, seg_len, dk).noalias() =
                p.transpose() * gs;
            dp.noalias() = gs * vs.transpose();
            const Vector rs = dp.cwiseProduct(p).rowwise().sum();
            ds = p.cwiseProduct(dp.colwise() - rs) * inv_sqrt;
            dq.block(s * seg_len, h * dk, seg_len, dk).noalias() = ds * ks;
            dkm.block(s * seg_len, h * dk, seg_len, dk).noalias() =
                ds.transpose() * qs;
          }
        }
        t->accumulate(q, dq);
        t->accumulate(k, dkm);
        t->accumulate(v, dv);
      });
}

Var attentive_stats_pool(Var h, Var w, Var b, Var v, int seg_len, double eps) {
  Tape* t = h.tape();
  const Matrix& hv = h.value();
  check_segments(hv, seg_len, "attentive_stats_pool");
  const Eigen::Index c = hv.cols();
  if (w.value().rows() != c || b.value().cols() != w.value().cols() ||
      v.value().rows() != w.value().cols() || v.value().cols() != 1) {
    throw ShapeError("attentive_stats_pool: attention parameter shapes");
  }
  const Eigen::Index segs = hv.rows() / seg_len;
  Matrix a = (hv * w.value()).rowwise() + b.value().row(0);
  a = a.array().tanh().matrix();
  const Vector e = a * v.value().col(0);
  Vector alpha(hv.rows());
  Matrix y(segs, 2 * c);
  Matrix mu(segs, c), sigma(segs, c);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> clipped(
      segs, c);
  for (Eigen::Index s = 0; s < segs; ++s) {
    auto es = e.segment(s * seg_len, seg_len);
    auto al = alpha.segment(s * seg_len, seg_len);
    al = (es.array() - es.maxCoeff()).exp();
    al /= al.sum();
    const auto hs = hv.middleRows(s * seg_len, seg_len);
    mu.row(s) = al.transpose() * hs;
    const RowVector m2 = al.transpose() * hs.cwiseProduct(hs);
    for (Eigen::Index j = 0; j < c; ++j) {
      const double var = m2[j] - mu(s, j) * mu(s, j);
      clipped(s, j) = !(var > eps);
      sigma(s, j) = std::sqrt(clipped(s, j) ? eps : var);
    }
  }
  y.leftCols(c) = mu;
  y.rightCols(c) = sigma;
  return t->record(
      std::move(y), {h, w, b, v},
      [t, h, w, b, v, seg_len, segs, c, a = std::move(a),
       alpha = std::move(alpha), mu = std::move(mu), sigma = std::move(sigma),
       clipped = std::move(clipped)](const Matrix& g, const Matrix&) {
        const Matrix& hv = t->value(h);
        const Matrix& wv = t->value(w);
        const Matrix& vv = t->value(v);
        Matrix dh(hv.rows(), c);
        Vector de(hv.rows());
        for (Eigen::Index s = 0; s < segs; ++s) {
          RowVector dvar(c);
          for (Eigen::Index j = 0; j < c; ++j) {
            dvar[j] = clipped(s, j) ? 0.0 : g(s, c + j) / (2.0 * sigma(s, j));
          }
          const RowVector dmu = g.row(s).head(c) - 2.0 * mu.row(s).cwiseProduct(dvar);
          const auto hs = hv.middleRows(s * seg_len, seg_len);
          const auto al = alpha.segment(s * seg_len, seg_len);
          // mu = sum_t alpha_t h_t and m2 = sum_t alpha_t h_t^2, so
          // dL/dh_t = alpha_t (dmu + 2 h_t dvar) and
          // dL/dalpha_t = h_t . dmu + h_t^2 . dvar.
          const Matrix h_dvar = hs.array().rowwise() * dvar.array();
          Matrix direct = (2.0 * h_dvar).rowwise() + dmu;
          const Vector dalpha =
              hs * dmu.transpose() + h_dvar.cwiseProduct(hs).rowwise().sum();
          dh.middleRows(s * seg_len, seg_len) =
              direct.array().colwise() * al.array();
          de.segment(s * seg_len, seg_len) =
              al.cwiseProduct(dalpha - Vector::Constant(seg_len, al.dot(dalpha)));
        }
        // Through the attention scores.
        Matrix dz = (de * vv.col(0).transpose()).cwiseProduct(
            (1.0 - a.array().square()).matrix());
        if (t->needs_grad(v)) t->accumulate(v, a.transpose() * de);
        if (t->needs_grad(w)) t->accumulate(w, hv.transpose() * dz);
        if (t->needs_grad(b)) t->accumulate(b, dz.colwise().sum());
        if (t->needs_grad(h)) {
          dh.noalias() += dz * wv.transpose();
          t->accumulate(h, dh);
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape* t = parts[0].tape();
  const Eigen::Index rows = parts[0].value().rows();
  Eigen::Index cols = 0;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) throw ShapeError("concat_cols: row mismatch");
    widths.push_back(p.value().cols());
    cols += p.value().cols();
  }
  Matrix y(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    y.middleCols(off, p.value().cols()) = p.value();
    off += p.value().cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t->record(std::move(y), parts,
                   [t, inputs, widths](const Matrix& g, const Matrix&) {
                     Eigen::Index off = 0;
                     for (size_t i = 0; i < inputs.size(); ++i) {
                       t->accumulate(inputs[i], g.middleCols(off, widths[i]));
                       off += widths[i];
                     }
                   });
}

Var l2_normalize_rows(Var x) {
  Tape* t = x.tape();
  const Matrix& xv = x.value();
  Vector norms = xv.rowwise().norm();
  if ((norms.array() <= 0.0).any()) {
    throw DegenerateInputError("l2_normalize_rows: zero row");
  }
  Matrix y = xv.array().colwise() / norms.array();
  return t->record(std::move(y), {x},
                   [t, x, norms = std::move(norms)](const Matrix& g,
                                                    const Matrix& yv) {
                     const Vector proj = yv.cwiseProduct(g).rowwise().sum();
                     Matrix dx = g - (yv.array().colwise() * proj.array()).matrix();
                     t->accumulate(x, (dx.array().colwise() / norms.array()).matrix());
                   });
}

}  // namespace mfcon::ag
