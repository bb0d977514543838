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

#include <string>
#include <vector>

#include "mfcon/encoder.hpp"

namespace mfcon {

struct HeadConfig {
  // Width of every per-block feature-map embedding.
  int embed_dim = 192;
  // Width of the final (MFA) speaker embedding.
  int speaker_dim = 192;
  // Pooling = the layer norm and attention of a head; projection = its batch
  // norm and linear map. Each can be shared across blocks independently.
  bool share_pooling = false;
  bool share_projection = false;
  int attention_hidden = 64;
  double pool_eps = 1e-8;
  double bn_momentum = 0.1;

  void validate() const;
};

/// Parameter prefixes of one head, e.g. "head.3" or "head.shared".
struct HeadRoute {
  std::string pooling;
  std::string projection;
};

HeadRoute head_route(const HeadConfig& cfg, int block);

// Per-block heads (or shared ones), the MFA head and nothing else. The
// classifier is owned by the model.
void init_head_params(ParameterStore& params, const EncoderConfig& enc,
                      const HeadConfig& cfg, uint64_t seed);

/// Plain-matrix attentive statistics pooling of one sequence (T x C) into
/// [mu, sigma] of length 2C.
Vector attentive_stats_pool(const Matrix& h, const Matrix& w,
                            const RowVector& b, const Vector& v,
                            double eps = 1e-8);

/// Layer norm -> attentive statistics pooling -> batch norm -> linear.
/// Returns segments x out_dim (unnormalized).
ag::Var head_forward(ForwardContext& ctx, const HeadConfig& cfg,
                     const HeadRoute& route, ag::Var tap, int seg_len);

/// One embedding batch per block, rows L2-normalized.
std::vector<ag::Var> feature_map_embeddings(ForwardContext& ctx,
                                            const HeadConfig& cfg,
                                            const TapSet& taps);

/// MFA path: channel-wise concatenation of all taps, then the head stack
/// under the "mfa" prefix. Unnormalized.
ag::Var speaker_embedding(ForwardContext& ctx, const HeadConfig& cfg,
                          const TapSet& taps);

}  // namespace mfcon
