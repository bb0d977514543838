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

#include "mfcon/encoder.hpp"

#include <cmath>

#include "mfcon/errors.hpp"

namespace mfcon {

void EncoderConfig::validate() const {
  if (n_mels < 1) throw ConfigError("encoder.n_mels must be >= 1");
  if (num_blocks < 1) throw ConfigError("encoder.num_blocks must be >= 1");
  if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0) {
    throw ConfigError("encoder.model_dim must be divisible by num_heads");
  }
  if (model_dim % 2 != 0) throw ConfigError("encoder.model_dim must be even");
  if (ff_expansion < 1) throw ConfigError("encoder.ff_expansion must be >= 1");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ConfigError("encoder.conv_kernel must be odd");
  }
  if (frontend_kernel < 1 || frontend_kernel % 2 == 0) {
    throw ConfigError("encoder.frontend_kernel must be odd");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("encoder.dropout must be in [0, 1)");
  }
}

EncoderConfig EncoderConfig::full_scale() {
  EncoderConfig cfg;
  cfg.num_blocks = 6;
  cfg.model_dim = 256;
  cfg.num_heads = 4;
  cfg.ff_expansion = 4;
  cfg.conv_kernel = 15;
  cfg.dropout = 0.1;
  return cfg;
}

ForwardContext::ForwardContext(ag::Tape& tape, ParameterStore& params,
                               Mode mode, uint64_t dropout_seed)
    : tape_(tape),
      mutable_params_(&params),
      params_(params),
      mode_(mode),
      dropout_seed_(dropout_seed) {}

ForwardContext::ForwardContext(ag::Tape& tape, const ParameterStore& params)
    : tape_(tape),
      mutable_params_(nullptr),
      params_(params),
      mode_(Mode::kEval),
      dropout_seed_(0) {}

ag::Var ForwardContext::param(const std::string& name) {
  if (mutable_params_ != nullptr) return tape_.param(mutable_params_->at(name));
  return tape_.constant(params_.at(name).value);
}

ag::BatchNormState ForwardContext::batch_norm_state(const std::string& prefix,
                                                    double momentum) {
  ag::BatchNormState st;
  st.train = training();
  st.momentum = momentum;
  if (st.train && mutable_params_ == nullptr) {
    throw ConfigError("train mode needs mutable parameters");
  }
  st.running_mean = &params_.at(prefix + ".running_mean").value;
  st.running_var = &params_.at(prefix + ".running_var").value;
  if (st.train) {
    st.running_mean_out = &mutable_params_->at(prefix + ".running_mean").value;
    st.running_var_out = &mutable_params_->at(prefix + ".running_var").value;
  }
  return st;
}

uint64_t ForwardContext::next_dropout_seed() {
  return mix_seed(dropout_seed_, dropout_calls_++);
}

int subsampled_length(int num_frames, const EncoderConfig& cfg) {
  return ag::conv_out_len(num_frames, cfg.frontend_kernel, 2,
                          cfg.frontend_kernel / 2);
}

namespace {

void add_linear(ParameterStore& p, const std::string& prefix, int in, int out,
                Rng& rng) {
  p.add(prefix + ".w", xavier_uniform(in, out, rng));
  p.add(prefix + ".b", Matrix::Zero(1, out));
}

void add_norm(ParameterStore& p, const std::string& prefix, int dim) {
  p.add(prefix + ".gamma", Matrix::Ones(1, dim));
  p.add(prefix + ".beta", Matrix::Zero(1, dim));
}

void add_feed_forward(ParameterStore& p, const std::string& prefix, int dim,
                      int expansion, Rng& rng) {
  add_norm(p, prefix + ".ln", dim);
  add_linear(p, prefix + ".fc1", dim, dim * expansion, rng);
  add_linear(p, prefix + ".fc2", dim * expansion, dim, rng);
}

ag::Var layer_norm(ForwardContext& ctx, const std::string& prefix, ag::Var x) {
  return ag::layer_norm(x, ctx.param(prefix + ".gamma"),
                        ctx.param(prefix + ".beta"));
}

ag::Var linear(ForwardContext& ctx, const std::string& prefix, ag::Var x) {
  return ag::linear(x, ctx.param(prefix + ".w"), ctx.param(prefix + ".b"));
}

ag::Var maybe_dropout(ForwardContext& ctx, const EncoderConfig& cfg,
                      ag::Var x) {
  if (!ctx.training() || cfg.dropout <= 0.0) return x;
  return ag::dropout(x, cfg.dropout, ctx.next_dropout_seed());
}

ag::Var feed_forward(ForwardContext& ctx, const EncoderConfig& cfg,
                     const std::string& prefix, ag::Var x) {
  ag::Var h = layer_norm(ctx, prefix + ".ln", x);
  h = ag::silu(linear(ctx, prefix + ".fc1", h));
  h = maybe_dropout(ctx, cfg, h);
  h = linear(ctx, prefix + ".fc2", h);
  return maybe_dropout(ctx, cfg, h);
}

ag::Var self_attention(ForwardContext& ctx, const EncoderConfig& cfg,
                       const std::string& prefix, ag::Var x, int seg_len) {
  ag::Var h = layer_norm(ctx, prefix + ".ln", x);
  ag::Var q = linear(ctx, prefix + ".q", h);
  ag::Var k = linear(ctx, prefix + ".k", h);
  ag::Var v = linear(ctx, prefix + ".v", h);
  ag::Var a = ag::attention(q, k, v, cfg.num_heads, seg_len);
  return maybe_dropout(ctx, cfg, linear(ctx, prefix + ".out", a));
}

ag::Var conv_module(ForwardContext& ctx, const EncoderConfig& cfg,
                    const std::string& prefix, ag::Var x, int seg_len) {
  ag::Var h = layer_norm(ctx, prefix + ".ln", x);
  h = ag::glu(linear(ctx, prefix + ".pw1", h));
  h = ag::depthwise_conv(h, ctx.param(prefix + ".dw.w"),
                         ctx.param(prefix + ".dw.b"), seg_len);
  h = ag::batch_norm(h, ctx.param(prefix + ".bn.gamma"),
                     ctx.param(prefix + ".bn.beta"),
                     ctx.batch_norm_state(prefix + ".bn"));
  h = ag::silu(h);
  h = linear(ctx, prefix + ".pw2", h);
  return maybe_dropout(ctx, cfg, h);
}

std::string block_prefix(int block) {
  return "blocks." + std::to_string(block);
}

}  // namespace

void init_encoder_params(ParameterStore& params, const EncoderConfig& cfg,
                         uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0xE1C0DE));
  const int d = cfg.model_dim;
  add_linear(params, "frontend.conv", cfg.frontend_kernel * cfg.n_mels, d, rng);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    const std::string pre = block_prefix(b);
    add_feed_forward(params, pre + ".ff1", d, cfg.ff_expansion, rng);
    add_norm(params, pre + ".mhsa.ln", d);
    for (const char* n : {".q", ".k", ".v", ".out"}) {
      add_linear(params, pre + ".mhsa" + n, d, d, rng);
    }
    add_norm(params, pre + ".conv.ln", d);
    add_linear(params, pre + ".conv.pw1", d, 2 * d, rng);
    {
      // Depthwise kernels: fan-in is the kernel width.
      const double a = std::sqrt(3.0 / cfg.conv_kernel);
      Matrix w(cfg.conv_kernel, d);
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = uniform(rng, -a, a);
      }
      params.add(pre + ".conv.dw.w", std::move(w));
      params.add(pre + ".conv.dw.b", Matrix::Zero(1, d));
    }
    add_norm(params, pre + ".conv.bn", d);
    params.add(pre + ".conv.bn.running_mean", Matrix::Zero(1, d), false);
    params.add(pre + ".conv.bn.running_var", Matrix::Ones(1, d), false);
    add_linear(params, pre + ".conv.pw2", d, d, rng);
    add_feed_forward(params, pre + ".ff2", d, cfg.ff_expansion, rng);
    add_norm(params, pre + ".out_ln", d);
  }
}

Matrix sinusoidal_positions(int seg_len, int dim) {
  Matrix pe(seg_len, dim);
  for (int t = 0; t < seg_len; ++t) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe(t, i) = std::sin(t * freq);
      if (i + 1 < dim) pe(t, i + 1) = std::cos(t * freq);
    }
  }
  return pe;
}

ag::Var subsample_frontend(ForwardContext& ctx, const EncoderConfig& cfg,
                           ag::Var x, int seg_len) {
  if (x.cols() != cfg.n_mels) {
    throw ShapeError("frontend expects " + std::to_string(cfg.n_mels) +
                     " mel bins, got " + std::to_string(x.cols()));
  }
  if (seg_len < 4) {
    throw LengthError("frontend needs at least 4 frames, got " +
                      std::to_string(seg_len));
  }
  const int k = cfg.frontend_kernel;
  ag::Var cols = ag::im2col(x, seg_len, k, 2, k / 2);
  ag::Var h = ag::relu(linear(ctx, "frontend.conv", cols));
  const int out_len = subsampled_length(seg_len, cfg);
  const Matrix pe = sinusoidal_positions(out_len, cfg.model_dim);
  const Eigen::Index segs = h.rows() / out_len;
  Matrix tiled(h.rows(), h.cols());
  for (Eigen::Index s = 0; s < segs; ++s) {
    tiled.middleRows(s * out_len, out_len) = pe;
  }
  return ag::add(h, ctx.tape().constant(std::move(tiled)));
}

ag::Var conformer_block(ForwardContext& ctx, const EncoderConfig& cfg,
                        int block, ag::Var h, int seg_len) {
  if (h.cols() != cfg.model_dim || seg_len < 1 || h.rows() % seg_len != 0) {
    throw ShapeError("conformer block " + std::to_string(block) +
                     ": input is " + std::to_string(h.rows()) + "x" +
                     std::to_string(h.cols()) + ", expected rows divisible by " +
                     std::to_string(seg_len) + " and " +
                     std::to_string(cfg.model_dim) + " columns");
  }
  if (block < 0 || block >= cfg.num_blocks) {
    throw ShapeError("block index out of range");
  }
  const std::string pre = block_prefix(block);
  ag::Var x = ag::add_scaled(h, feed_forward(ctx, cfg, pre + ".ff1", h), 0.5);
  x = ag::add(x, self_attention(ctx, cfg, pre + ".mhsa", x, seg_len));
  x = ag::add(x, conv_module(ctx, cfg, pre + ".conv", x, seg_len));
  x = ag::add_scaled(x, feed_forward(ctx, cfg, pre + ".ff2", x), 0.5);
  return layer_norm(ctx, pre + ".out_ln", x);
}

TapSet encode_with_taps(ForwardContext& ctx, const EncoderConfig& cfg,
                        ag::Var x, int seg_len) {
  TapSet taps;
  ag::Var h = subsample_frontend(ctx, cfg, x, seg_len);
  taps.seg_len = subsampled_length(seg_len, cfg);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    h = conformer_block(ctx, cfg, b, h, taps.seg_len);
    taps.maps.push_back(h);
  }
  return taps;
}

}  // namespace mfcon
