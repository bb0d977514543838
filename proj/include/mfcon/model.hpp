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
#include <span>
#include <vector>

#include "mfcon/features.hpp"
#include "mfcon/heads.hpp"

namespace mfcon {

struct ModelConfig {
  int sample_rate = 16000;
  FbankOptions fbank;
  FeatureNorm feature_norm = FeatureNorm::kGlobal;
  EncoderConfig encoder;
  HeadConfig head;
  // Training speakers (rows of the classifier).
  int num_classes = 0;

  void validate() const;
};

/// Encoder, per-block heads, MFA head and AM-Softmax classifier in one
/// parameter store.
///
/// Parameter names:
///   frontend.conv.{w,b}
///   blocks.<k>.{ff1,ff2}.{ln.gamma,ln.beta,fc1.w,fc1.b,fc2.w,fc2.b}
///   blocks.<k>.mhsa.{ln.gamma,ln.beta,q.w,q.b,k.w,k.b,v.w,v.b,out.w,out.b}
///   blocks.<k>.conv.{ln.*,pw1.*,dw.w,dw.b,bn.gamma,bn.beta,
///                    bn.running_mean,bn.running_var,pw2.*}
///   blocks.<k>.out_ln.{gamma,beta}
///   head.<k|shared>.{ln,attn,bn,proj}.*, mfa.{ln,attn,bn,proj}.*
///   classifier.weight
class Model {
 public:
  Model() = default;
  Model(ModelConfig cfg, uint64_t seed);
  // Adopts an existing parameter set (checkpoint load).
  Model(ModelConfig cfg, ParameterStore params);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  struct Outputs {
    TapSet taps;
    // Unit-norm rows per block; empty unless requested.
    std::vector<ag::Var> tap_embeddings;
    ag::Var speaker;
  };

  /// Records a forward pass of stacked, equal-length feature sequences
  /// ((segments * seg_len) x n_mels) on ctx's tape.
  Outputs forward(ForwardContext& ctx, const Matrix& features, int seg_len,
                  bool with_tap_embeddings) const;

  /// Eval-mode speaker embedding of one utterance's features (T x n_mels,
  /// already normalized).
  Vector embed_features(const Matrix& features) const;

  /// Fbank and normalization as used in training.
  FeatureMatrix features(const Waveform& w) const;

  /// features -> embed_features.
  Vector embed(const Waveform& w) const;

  const FbankExtractor& fbank() const { return fbank_; }

 private:
  ModelConfig cfg_;
  ParameterStore params_;
  FbankExtractor fbank_{16000, FbankOptions{}};
};

}  // namespace mfcon
