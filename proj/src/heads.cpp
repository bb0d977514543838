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

#include "mfcon/heads.hpp"

#include "mfcon/errors.hpp"

namespace mfcon {

void HeadConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("head.embed_dim must be >= 1");
  if (speaker_dim < 1) throw ConfigError("head.speaker_dim must be >= 1");
  if (attention_hidden < 1) {
    throw ConfigError("head.attention_hidden must be >= 1");
  }
  if (!(pool_eps > 0)) throw ConfigError("head.pool_eps must be positive");
}

HeadRoute head_route(const HeadConfig& cfg, int block) {
  const std::string own = "head." + std::to_string(block);
  return {cfg.share_pooling ? "head.shared" : own,
          cfg.share_projection ? "head.shared" : own};
}

namespace {

void add_pooling(ParameterStore& p, const std::string& prefix, int channels,
                 int hidden, Rng& rng) {
  p.add(prefix + ".ln.gamma", Matrix::Ones(1, channels));
  p.add(prefix + ".ln.beta", Matrix::Zero(1, channels));
  p.add(prefix + ".attn.w", xavier_uniform(channels, hidden, rng));
  p.add(prefix + ".attn.b", Matrix::Zero(1, hidden));
  p.add(prefix + ".attn.v", xavier_uniform(hidden, 1, rng));
}

void add_projection(ParameterStore& p, const std::string& prefix, int in,
                    int out, Rng& rng) {
  p.add(prefix + ".bn.gamma", Matrix::Ones(1, in));
  p.add(prefix + ".bn.beta", Matrix::Zero(1, in));
  p.add(prefix + ".bn.running_mean", Matrix::Zero(1, in), false);
  p.add(prefix + ".bn.running_var", Matrix::Ones(1, in), false);
  p.add(prefix + ".proj.w", xavier_uniform(in, out, rng));
  p.add(prefix + ".proj.b", Matrix::Zero(1, out));
}

}  // namespace

void init_head_params(ParameterStore& params, const EncoderConfig& enc,
                      const HeadConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x4EAD));
  const int c = enc.model_dim;
  for (int b = 0; b < enc.num_blocks; ++b) {
    const HeadRoute r = head_route(cfg, b);
    if (!params.contains(r.pooling + ".attn.w")) {
      add_pooling(params, r.pooling, c, cfg.attention_hidden, rng);
    }
    if (!params.contains(r.projection + ".proj.w")) {
      add_projection(params, r.projection, 2 * c, cfg.embed_dim, rng);
    }
  }
  const int concat = c * enc.num_blocks;
  add_pooling(params, "mfa", concat, cfg.attention_hidden, rng);
  add_projection(params, "mfa", 2 * concat, cfg.speaker_dim, rng);
}

Vector attentive_stats_pool(const Matrix& h, const Matrix& w,
                            const RowVector& b, const Vector& v, double eps) {
  ag::Tape tape;
  ag::Var out = ag::attentive_stats_pool(
      tape.constant(h), tape.constant(w), tape.constant(Matrix(b)),
      tape.constant(Matrix(v)), static_cast<int>(h.rows()), eps);
  return out.value().row(0).transpose();
}

ag::Var head_forward(ForwardContext& ctx, const HeadConfig& cfg,
                     const HeadRoute& route, ag::Var tap, int seg_len) {
  const std::string& p = route.pooling;
  const std::string& q = route.projection;
  const auto& gamma = ctx.params().at(p + ".ln.gamma").value;
  if (tap.cols() != gamma.cols()) {
    throw ShapeError("head " + p + " expects " + std::to_string(gamma.cols()) +
                     " channels, got " + std::to_string(tap.cols()));
  }
  ag::Var h = ag::layer_norm(tap, ctx.param(p + ".ln.gamma"),
                             ctx.param(p + ".ln.beta"));
  h = ag::attentive_stats_pool(h, ctx.param(p + ".attn.w"),
                               ctx.param(p + ".attn.b"),
                               ctx.param(p + ".attn.v"), seg_len, cfg.pool_eps);
  h = ag::batch_norm(h, ctx.param(q + ".bn.gamma"), ctx.param(q + ".bn.beta"),
                     ctx.batch_norm_state(q + ".bn", cfg.bn_momentum));
  return ag::linear(h, ctx.param(q + ".proj.w"), ctx.param(q + ".proj.b"));
}

std::vector<ag::Var> feature_map_embeddings(ForwardContext& ctx,
                                            const HeadConfig& cfg,
                                            const TapSet& taps) {
  std::vector<ag::Var> out;
  out.reserve(taps.maps.size());
  for (size_t b = 0; b < taps.maps.size(); ++b) {
    const HeadRoute r = head_route(cfg, static_cast<int>(b));
    if (!ctx.params().contains(r.pooling + ".attn.w") ||
        !ctx.params().contains(r.projection + ".proj.w")) {
      throw ConfigError("no head parameters for block " + std::to_string(b) +
                        " under the configured sharing flags");
    }
    out.push_back(ag::l2_normalize_rows(
        head_forward(ctx, cfg, r, taps.maps[b], taps.seg_len)));
  }
  return out;
}

ag::Var speaker_embedding(ForwardContext& ctx, const HeadConfig& cfg,
                          const TapSet& taps) {
  if (taps.maps.empty()) throw ShapeError("speaker_embedding: empty tap set");
  ag::Var cat = taps.maps.size() == 1 ? taps.maps[0]
                                      : ag::concat_cols(taps.maps);
  return head_forward(ctx, cfg, HeadRoute{"mfa", "mfa"}, cat, taps.seg_len);
}

}  // namespace mfcon
