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

#include <gtest/gtest.h>

#include <json.hpp>

#include <fstream>

#include "mfcon/errors.hpp"
#include "mfcon/pipeline.hpp"
#include "test_util.hpp"

namespace mfcon {
namespace {

RunConfig unusual_config() {
  RunConfig c;
  c.model.encoder.num_blocks = 3;
  c.model.encoder.dropout = 0.125;
  c.model.head.share_projection = true;
  c.model.feature_norm = FeatureNorm::kCmn;
  c.train.batch_size = 7;
  c.train.lr = 3e-4;
  c.train.objective = Objective::kCombined;
  c.train.loss.margin_style = MarginStyle::kAngularAdditive;
  c.train.loss.contrastive_kind = ContrastiveKind::kNPair;
  c.train.loss.lambda1 = 0.1;
  c.train.augment.p_noise = 0.25;
  c.synth.n_speakers = 5;
  c.synth.channel_depth = 1.5;
  c.eval.trial_seed = 9;
  c.data.noise_dir = "/tmp/noise";
  return c;
}

TEST(RunConfig, JsonRoundTrip) {
  const RunConfig c = unusual_config();
  const std::string text = to_json(c);
  const RunConfig back = run_config_from_json(text);
  EXPECT_EQ(to_json(back), text);
  EXPECT_EQ(back.model.encoder.num_blocks, 3);
  EXPECT_EQ(back.model.encoder.dropout, 0.125);
  EXPECT_TRUE(back.model.head.share_projection);
  EXPECT_EQ(back.model.feature_norm, FeatureNorm::kCmn);
  EXPECT_EQ(back.train.objective, Objective::kCombined);
  EXPECT_EQ(back.train.loss.margin_style, MarginStyle::kAngularAdditive);
  EXPECT_EQ(back.train.loss.contrastive_kind, ContrastiveKind::kNPair);
  EXPECT_EQ(back.train.lr, 3e-4);
  EXPECT_EQ(back.synth.channel_depth, 1.5);
  EXPECT_EQ(back.eval.trial_seed, 9u);
  EXPECT_EQ(back.data.noise_dir, "/tmp/noise");
}

TEST(RunConfig, PartialDocumentsKeepDefaults) {
  const RunConfig c =
      run_config_from_json(R"({"train": {"epochs": 3, "loss": {"lambda": 0.1}}})");
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.train.loss.lambda, 0.1);
  EXPECT_EQ(c.train.batch_size, TrainConfig().batch_size);
  EXPECT_EQ(c.model.encoder.num_blocks, 6);
}

TEST(RunConfig, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(run_config_from_json(R"({"trian": {}})"), ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"train": {"epoch": 3}})"), ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"model": {"encoder": {"depth": 3}}})"),
               ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"train": {"epochs": "many"}})"),
               ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"train": {"objective": "arcface"}})"),
               ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"train": {"batch_size": 0}})"),
               ConfigError);
  EXPECT_THROW(run_config_from_json("{not json"), ConfigError);
  EXPECT_THROW(run_config_from_json("[]"), ConfigError);
}

TEST(RunConfig, LoadFromFile) {
  testing::ScratchDir dir("config");
  std::ofstream(dir / "c.json") << to_json(unusual_config());
  EXPECT_EQ(load_run_config(dir / "c.json").train.batch_size, 7);
  EXPECT_THROW(load_run_config(dir / "absent.json"), ConfigError);
}

TEST(RunConfig, DeskScalePreset) {
  const RunConfig c = RunConfig::desk_scale();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model.encoder.num_blocks, 2);
  EXPECT_EQ(c.model.encoder.model_dim, 64);
  EXPECT_EQ(c.train.batch_size, 25);
  EXPECT_EQ(c.train.crop_seconds, 0.5);
  EXPECT_EQ(c.train.epochs, 30);
  EXPECT_EQ(c.train.lr, 1e-3);
  EXPECT_EQ(c.train.lr_halve_every, 5);
}

TEST(ModelConfig, JsonRoundTripAndValidation) {
  ModelConfig m = unusual_config().model;
  m.num_classes = 4;
  const ModelConfig back = model_config_from_json(to_json(m));
  EXPECT_EQ(to_json(back), to_json(m));
  m.num_classes = 0;
  EXPECT_THROW(model_config_from_json(to_json(m)), ConfigError);
  auto j = nlohmann::json::parse(to_json(back));
  j["encoder"]["n_mels"] = 40;
  EXPECT_THROW(model_config_from_json(j.dump()), ConfigError);
}

TEST(Pipeline, SyntheticBenchmarkHoldsOutUtterances) {
  RunConfig c;
  c.synth.n_speakers = 3;
  c.synth.utts_per_speaker = 2;
  c.synth.duration = 0.3;
  c.eval.utts_per_speaker = 3;
  c.eval.n_target = 4;
  c.eval.n_nontarget = 5;
  const RunData d = load_run_data(c);
  EXPECT_EQ(d.train.size(), 6u);
  EXPECT_EQ(d.eval.size(), 9u);
  EXPECT_EQ(d.trials.size(), 9u);
  std::set<std::string> train_ids;
  for (const auto& w : d.train) train_ids.insert(w.utterance_id);
  for (const auto& w : d.eval) {
    EXPECT_EQ(train_ids.count(w.utterance_id), 0u);
    EXPECT_EQ(w.utterance_id.substr(0, 6), w.speaker_id);
  }
}

TEST(Pipeline, ManifestRunsCheckTrialIds) {
  testing::ScratchDir dir("pipeline");
  SynthSpec s;
  s.n_speakers = 2;
  s.utts_per_speaker = 2;
  s.duration = 0.3;
  const auto corpus = generate_corpus(s);
  export_corpus(dir / "train", corpus, {});
  std::vector<Trial> trials = generate_trials(corpus, 1, 1, 0);
  trials.push_back({"ghost-a", corpus[0].utterance_id, true});
  trials.push_back({corpus[1].utterance_id, "ghost-b", false});
  export_corpus(dir / "eval", corpus, trials);
  RunConfig c;
  c.data.train_manifest = (dir / "train/manifest.txt").string();
  EXPECT_EQ(load_run_data(c).train.size(), 4u);
  c.data.eval_manifest = (dir / "eval/manifest.txt").string();
  EXPECT_THROW(load_run_data(c), ConfigError);
  c.data.trials = (dir / "eval/trials.txt").string();
  try {
    load_run_data(c);
    FAIL() << "expected LookupError";
  } catch (const LookupError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ghost-a"), std::string::npos);
    EXPECT_NE(msg.find("ghost-b"), std::string::npos);
  }
  c.model.sample_rate = 8000;
  c.data.eval_manifest.clear();
  c.data.trials.clear();
  EXPECT_THROW(load_run_data(c), DataError);
}

}  // namespace
}  // namespace mfcon
