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

#include "mfcon/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mfcon/errors.hpp"

namespace mfcon {

using nlohmann::json;

namespace {

// Reads fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key " + path_ + "." + key);
      }
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for " + path_ + "." + key);
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, s);
    out = parse(s);
  }

  // Sub-object, or an empty one when absent.
  Section sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty() : *it, path_ + "." + key);
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json fbank_json(const FbankOptions& o) {
  return {{"n_mels", o.n_mels},         {"frame_len", o.frame_len},
          {"frame_shift", o.frame_shift}, {"low_freq", o.low_freq},
          {"high_freq", o.high_freq},   {"log_floor", o.log_floor}};
}

void read_fbank(Section s, FbankOptions& o) {
  s.get("n_mels", o.n_mels);
  s.get("frame_len", o.frame_len);
  s.get("frame_shift", o.frame_shift);
  s.get("low_freq", o.low_freq);
  s.get("high_freq", o.high_freq);
  s.get("log_floor", o.log_floor);
}

json encoder_json(const EncoderConfig& c) {
  return {{"n_mels", c.n_mels},
          {"num_blocks", c.num_blocks},
          {"model_dim", c.model_dim},
          {"num_heads", c.num_heads},
          {"ff_expansion", c.ff_expansion},
          {"conv_kernel", c.conv_kernel},
          {"frontend_kernel", c.frontend_kernel},
          {"dropout", c.dropout}};
}

void read_encoder(Section s, EncoderConfig& c) {
  s.get("n_mels", c.n_mels);
  s.get("num_blocks", c.num_blocks);
  s.get("model_dim", c.model_dim);
  s.get("num_heads", c.num_heads);
  s.get("ff_expansion", c.ff_expansion);
  s.get("conv_kernel", c.conv_kernel);
  s.get("frontend_kernel", c.frontend_kernel);
  s.get("dropout", c.dropout);
}

json head_json(const HeadConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"speaker_dim", c.speaker_dim},
          {"share_pooling", c.share_pooling},
          {"share_projection", c.share_projection},
          {"attention_hidden", c.attention_hidden},
          {"pool_eps", c.pool_eps},
          {"bn_momentum", c.bn_momentum}};
}

void read_head(Section s, HeadConfig& c) {
  s.get("embed_dim", c.embed_dim);
  s.get("speaker_dim", c.speaker_dim);
  s.get("share_pooling", c.share_pooling);
  s.get("share_projection", c.share_projection);
  s.get("attention_hidden", c.attention_hidden);
  s.get("pool_eps", c.pool_eps);
  s.get("bn_momentum", c.bn_momentum);
}

json model_json(const ModelConfig& c) {
  return {{"sample_rate", c.sample_rate},
          {"feature_norm", to_string(c.feature_norm)},
          {"fbank", fbank_json(c.fbank)},
          {"encoder", encoder_json(c.encoder)},
          {"head", head_json(c.head)},
          {"num_classes", c.num_classes}};
}

void read_model(Section s, ModelConfig& c) {
  s.get("sample_rate", c.sample_rate);
  s.get_enum("feature_norm", c.feature_norm, parse_feature_norm);
  read_fbank(s.sub("fbank"), c.fbank);
  read_encoder(s.sub("encoder"), c.encoder);
  read_head(s.sub("head"), c.head);
  s.get("num_classes", c.num_classes);
}

json loss_json(const LossConfig& c) {
  return {{"margin", c.margin},
          {"scale", c.scale},
          {"temperature", c.temperature},
          {"lambda", c.lambda},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"margin_style", to_string(c.margin_style)},
          {"contrastive_kind", to_string(c.contrastive_kind)},
          {"triplet_margin", c.triplet_margin},
          {"supcon_mean_over_anchors", c.supcon_mean_over_anchors},
          {"supcon_error_on_missing_positive",
           c.supcon_error_on_missing_positive}};
}

void read_loss(Section s, LossConfig& c) {
  s.get("margin", c.margin);
  s.get("scale", c.scale);
  s.get("temperature", c.temperature);
  s.get("lambda", c.lambda);
  s.get("lambda1", c.lambda1);
  s.get("lambda2", c.lambda2);
  s.get_enum("margin_style", c.margin_style, parse_margin_style);
  s.get_enum("contrastive_kind", c.contrastive_kind, parse_contrastive_kind);
  s.get("triplet_margin", c.triplet_margin);
  s.get("supcon_mean_over_anchors", c.supcon_mean_over_anchors);
  s.get("supcon_error_on_missing_positive",
        c.supcon_error_on_missing_positive);
}

json augment_json(const AugmentOptions& o) {
  return {{"p_noise", o.p_noise},   {"snr_min", o.snr_min},
          {"snr_max", o.snr_max},   {"rt60_min", o.rt60_min},
          {"rt60_max", o.rt60_max}, {"ir_length", o.ir_length}};
}

void read_augment(Section s, AugmentOptions& o) {
  s.get("p_noise", o.p_noise);
  s.get("snr_min", o.snr_min);
  s.get("snr_max", o.snr_max);
  s.get("rt60_min", o.rt60_min);
  s.get("rt60_max", o.rt60_max);
  s.get("ir_length", o.ir_length);
}

json train_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lr_halve_every", c.lr_halve_every},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"crop_seconds", c.crop_seconds},
          {"eval_every", c.eval_every},
          {"objective", to_string(c.objective)},
          {"loss", loss_json(c.loss)},
          {"augment", augment_json(c.augment)}};
}

void read_train(Section s, TrainConfig& c) {
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("lr_halve_every", c.lr_halve_every);
  s.get("epochs", c.epochs);
  s.get("seed", c.seed);
  s.get("crop_seconds", c.crop_seconds);
  s.get("eval_every", c.eval_every);
  s.get_enum("objective", c.objective, parse_objective);
  read_loss(s.sub("loss"), c.loss);
  read_augment(s.sub("augment"), c.augment);
}

json synth_json(const SynthSpec& c) {
  return {{"n_speakers", c.n_speakers},
          {"utts_per_speaker", c.utts_per_speaker},
          {"duration", c.duration},
          {"sample_rate", c.sample_rate},
          {"seed", c.seed},
          {"first_utterance", c.first_utterance},
          {"channel_depth", c.channel_depth},
          {"channel_tilt", c.channel_tilt}};
}

void read_synth(Section s, SynthSpec& c) {
  s.get("n_speakers", c.n_speakers);
  s.get("utts_per_speaker", c.utts_per_speaker);
  s.get("duration", c.duration);
  s.get("sample_rate", c.sample_rate);
  s.get("seed", c.seed);
  s.get("first_utterance", c.first_utterance);
  s.get("channel_depth", c.channel_depth);
  s.get("channel_tilt", c.channel_tilt);
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

void EvalSpec::validate() const {
  if (utts_per_speaker < 2) {
    throw ConfigError("eval.utts_per_speaker must be >= 2");
  }
  if (n_target < 0 || n_nontarget < 0) {
    throw ConfigError("eval trial counts must be >= 0");
  }
}

void RunConfig::validate() const {
  train.validate();
  synth.validate();
  eval.validate();
  ModelConfig m = model;
  // The class count comes from the data when left at 0.
  if (m.num_classes == 0) m.num_classes = 1;
  m.validate();
}

RunConfig RunConfig::desk_scale() {
  RunConfig c;
  c.model.encoder.num_blocks = 2;
  c.train.batch_size = 25;
  c.train.crop_seconds = 0.5;
  c.train.epochs = 30;
  return c;
}

std::string to_json(const ModelConfig& cfg) { return model_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  const json j = parse_text(text);
  ModelConfig c;
  read_model(Section(j, "model"), c);
  c.validate();
  return c;
}

std::string to_json(const RunConfig& cfg, int indent) {
  json j = {{"model", model_json(cfg.model)},
            {"train", train_json(cfg.train)},
            {"synth", synth_json(cfg.synth)},
            {"eval",
             {{"utts_per_speaker", cfg.eval.utts_per_speaker},
              {"n_target", cfg.eval.n_target},
              {"n_nontarget", cfg.eval.n_nontarget},
              {"trial_seed", cfg.eval.trial_seed}}},
            {"data",
             {{"train_manifest", cfg.data.train_manifest},
              {"eval_manifest", cfg.data.eval_manifest},
              {"trials", cfg.data.trials},
              {"noise_dir", cfg.data.noise_dir},
              {"ir_dir", cfg.data.ir_dir}}}};
  return j.dump(indent);
}

RunConfig run_config_from_json(const std::string& text) {
  const json j = parse_text(text);
  RunConfig c;
  {
    Section root(j, "config");
    read_model(root.sub("model"), c.model);
    read_train(root.sub("train"), c.train);
    read_synth(root.sub("synth"), c.synth);
    Section ev = root.sub("eval");
    ev.get("utts_per_speaker", c.eval.utts_per_speaker);
    ev.get("n_target", c.eval.n_target);
    ev.get("n_nontarget", c.eval.n_nontarget);
    ev.get("trial_seed", c.eval.trial_seed);
    Section data = root.sub("data");
    data.get("train_manifest", c.data.train_manifest);
    data.get("eval_manifest", c.data.eval_manifest);
    data.get("trials", c.data.trials);
    data.get("noise_dir", c.data.noise_dir);
    data.get("ir_dir", c.data.ir_dir);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return run_config_from_json(ss.str());
}

}  // namespace mfcon
