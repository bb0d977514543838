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

#include "mfcon/model.hpp"

#include "mfcon/errors.hpp"

namespace mfcon {

void ModelConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (fbank.n_mels != encoder.n_mels) {
    throw ConfigError("fbank.n_mels and encoder.n_mels differ");
  }
  encoder.validate();
  head.validate();
  if (num_classes < 1) throw ConfigError("model needs at least one class");
}

Model::Model(ModelConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)), fbank_(cfg_.sample_rate, cfg_.fbank) {
  cfg_.validate();
  init_encoder_params(params_, cfg_.encoder, seed);
  init_head_params(params_, cfg_.encoder, cfg_.head, seed);
  Rng rng(mix_seed(seed, 0xC1A55));
  params_.add("classifier.weight",
              xavier_uniform(cfg_.num_classes, cfg_.head.speaker_dim, rng));
}

Model::Model(ModelConfig cfg, ParameterStore params)
    : cfg_(std::move(cfg)),
      params_(std::move(params)),
      fbank_(cfg_.sample_rate, cfg_.fbank) {
  cfg_.validate();
  // Structural check against a freshly initialized twin.
  Model twin(cfg_, 0);
  for (const auto& [name, p] : twin.params()) {
    if (!params_.contains(name)) {
      throw DataError("checkpoint is missing parameter " + name);
    }
    const auto& q = params_.at(name);
    if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols()) {
      throw DataError("checkpoint parameter " + name + " has the wrong shape");
    }
    params_.at(name).trainable = p.trainable;
  }
  if (params_.size() != twin.params().size()) {
    throw DataError("checkpoint has parameters the configuration does not use");
  }
}

Model::Outputs Model::forward(ForwardContext& ctx, const Matrix& features,
                              int seg_len, bool with_tap_embeddings) const {
  Outputs out;
  ag::Var x = ctx.tape().constant(features);
  out.taps = encode_with_taps(ctx, cfg_.encoder, x, seg_len);
  if (with_tap_embeddings) {
    out.tap_embeddings = feature_map_embeddings(ctx, cfg_.head, out.taps);
  }
  out.speaker = speaker_embedding(ctx, cfg_.head, out.taps);
  return out;
}

Vector Model::embed_features(const Matrix& features) const {
  ag::Tape tape;
  ForwardContext ctx(tape, params_);
  Outputs out = forward(ctx, features, static_cast<int>(features.rows()),
                        false);
  return out.speaker.value().row(0).transpose();
}

FeatureMatrix Model::features(const Waveform& w) const {
  FeatureMatrix f = fbank_(w);
  normalize_features(f, cfg_.feature_norm);
  return f;
}

Vector Model::embed(const Waveform& w) const {
  return embed_features(features(w).values);
}

}  // namespace mfcon
