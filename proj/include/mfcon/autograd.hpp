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

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mfcon/tensor.hpp"

// A small reverse-mode tape over row-major matrices.
//
// Sequences are processed stacked: a batch of S sequences of T frames is one
// (S*T) x C matrix, and per-sequence ops take the segment length T. Every
// position-wise op therefore runs as one large GEMM.
namespace mfcon::ag {

/// A named array owned outside the tape. Non-trainable params (batch-norm
/// running statistics) enter the tape as constants.
struct Param {
  Matrix value;
  Matrix grad;
  bool trainable = true;

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Receives the node's accumulated gradient and its forward value.
  using BackwardFn =
      std::function<void(const Matrix& grad, const Matrix& value)>;

  Var constant(Matrix value);
  Var param(Param& p);

  // Records a node. `inputs` decide whether the node needs a gradient; the
  // backward function is dropped when none of them does.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);

  const Matrix& value(Var v) const { return nodes_[v.id_].value; }
  bool needs_grad(Var v) const { return v.valid() && nodes_[v.id_].needs_grad; }

  // Adds g to v's gradient when v participates in differentiation.
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    if (!needs_grad(v)) return;
    Matrix& dst = nodes_[v.id_].grad;
    if (dst.size() == 0) {
      dst = g;
    } else {
      dst += g;
    }
  }

  // Gradient accumulated at v so far (empty when none reached it).
  const Matrix& grad(Var v) const { return nodes_[v.id_].grad; }

  /// Seeds d(objective)/d(var) for each pair and runs the reverse sweep.
  /// Param gradients are added into Param::grad.
  void backward(std::span<const std::pair<Var, Matrix>> seeds);
  void backward(Var v, const Matrix& seed);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  // A deque keeps value() references valid while the tape grows.
  std::deque<Node> nodes_;
};

// ---- ops --------------------------------------------------------------------

// x * W + b, W is in x out, b is 1 x out (optional).
Var linear(Var x, Var w, Var b = {});
Var add(Var a, Var b);
// a + alpha * b
Var add_scaled(Var a, Var b, double alpha);
Var scale(Var a, double alpha);
Var relu(Var x);
Var silu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
// First half of the columns gated by sigmoid of the second half.
Var glu(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

struct BatchNormState {
  const Matrix* running_mean = nullptr;
  const Matrix* running_var = nullptr;
  // Written in train mode; may alias the read pointers.
  Matrix* running_mean_out = nullptr;
  Matrix* running_var_out = nullptr;
  double momentum = 0.1;
  double eps = 1e-5;
  bool train = false;
};
// Normalizes each column over all rows. In train mode the running statistics
// are updated as a side effect of the forward pass.
Var batch_norm(Var x, Var gamma, Var beta, const BatchNormState& state);

Var dropout(Var x, double p, uint64_t seed);

// Stacks `kernel` neighbouring frames per output frame (stride, zero padding),
// segment by segment. Output rows: segments * out_len, cols: kernel * C.
Var im2col(Var x, int seg_len, int kernel, int stride, int pad);
int conv_out_len(int in_len, int kernel, int stride, int pad);

// Per-channel 'same' convolution within each segment; w is kernel x C.
Var depthwise_conv(Var x, Var w, Var b, int seg_len);

// Scaled dot-product attention within each segment, `heads` column groups.
Var attention(Var q, Var k, Var v, int heads, int seg_len);

// e_t = tanh(h_t W + b) v, alpha = softmax_t(e), outputs [mu, sigma] per
// segment with sigma = sqrt(max(E_alpha[h^2] - mu^2, eps)).
Var attentive_stats_pool(Var h, Var w, Var b, Var v, int seg_len,
                         double eps = 1e-8);

Var concat_cols(std::span<const Var> parts);
Var l2_normalize_rows(Var x);

}  // namespace mfcon::ag
