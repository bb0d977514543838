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

#include "mfcon/checkpoint.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "mfcon/errors.hpp"
#include "mfcon/synthdata.hpp"
#include "mfcon/trainer.hpp"
#include "test_util.hpp"

namespace mfcon {
namespace {

using testing::SameMatrix;

ModelConfig small_config() {
  ModelConfig c;
  c.fbank.n_mels = 16;
  c.encoder.n_mels = 16;
  c.encoder.num_blocks = 2;
  c.encoder.model_dim = 16;
  c.encoder.num_heads = 2;
  c.head.embed_dim = 8;
  c.head.speaker_dim = 8;
  c.head.attention_hidden = 4;
  c.head.share_pooling = true;
  c.num_classes = 3;
  return c;
}

// A model whose batch-norm statistics have moved away from their initial
// values, so a round trip that dropped them would be caught.
Model trained_model(const std::vector<Waveform>& corpus) {
  Model model(small_config(), 1);
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.crop_seconds = 0.3;
  cfg.epochs = 1;
  train(model, make_dataset(corpus), cfg, Augmenter());
  return model;
}

std::vector<Waveform> small_corpus() {
  SynthSpec s;
  s.n_speakers = 3;
  s.utts_per_speaker = 3;
  s.duration = 0.5;
  return generate_corpus(s);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto corpus = small_corpus();
  const Model model = trained_model(corpus);
  EXPECT_FALSE(SameMatrix(model.params().at("mfa.bn.running_mean").value,
                          Matrix::Zero(1, 2 * 32)));
  testing::ScratchDir dir("ckpt");
  save_checkpoint(dir / "m.ckpt", model);
  const Model back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.params().size(), model.params().size());
  for (const auto& [name, p] : model.params()) {
    ASSERT_TRUE(back.params().contains(name)) << name;
    EXPECT_TRUE(SameMatrix(p.value, back.params().at(name).value)) << name;
    EXPECT_EQ(p.trainable, back.params().at(name).trainable) << name;
  }
  EXPECT_TRUE(back.config().head.share_pooling);
  EXPECT_EQ(back.config().num_classes, 3);

  const auto trials = generate_trials(corpus, 6, 6, 0);
  const UtteranceStore store = make_store(corpus);
  const EvalResult a = evaluate(model, trials, store);
  const EvalResult b = evaluate(back, trials, store);
  EXPECT_EQ(a.eer, b.eer);
  EXPECT_EQ(a.mindcf, b.mindcf);
  EXPECT_EQ(a.scores.scores, b.scores.scores);

  save_checkpoint(dir / "again.ckpt", back);
  EXPECT_EQ(file_bytes(dir / "m.ckpt"), file_bytes(dir / "again.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
}

TEST(Checkpoint, CorruptFilesAreDataErrors) {
  const Model model(small_config(), 2);
  testing::ScratchDir dir("corrupt");
  save_checkpoint(dir / "m.ckpt", model);
  const std::string bytes = file_bytes(dir / "m.ckpt");

  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), DataError);
  write_bytes(dir / "magic.ckpt", "NOTACKPT" + bytes.substr(8));
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), DataError);
  for (size_t cut : {size_t{5}, size_t{15}, bytes.size() / 2, bytes.size() - 1}) {
    write_bytes(dir / "cut.ckpt", bytes.substr(0, cut));
    EXPECT_THROW(load_checkpoint(dir / "cut.ckpt"), DataError) << "cut " << cut;
  }
  // A config length far beyond the file.
  std::string huge = bytes;
  for (int i = 0; i < 8; ++i) huge[11 + i] = '\xff';
  write_bytes(dir / "huge.ckpt", huge);
  EXPECT_THROW(load_checkpoint(dir / "huge.ckpt"), DataError);
}

TEST(Checkpoint, StructuralMismatchIsRejected) {
  const Model model(small_config(), 3);
  ParameterStore missing = model.params();
  ParameterStore rebuilt;
  for (const auto& [name, p] : missing) {
    if (name != "mfa.proj.w") rebuilt.add(name, p.value, p.trainable);
  }
  EXPECT_THROW(Model(small_config(), rebuilt), DataError);
  ParameterStore reshaped = model.params();
  reshaped.at("mfa.proj.w").value = Matrix::Zero(3, 3);
  EXPECT_THROW(Model(small_config(), reshaped), DataError);
}

}  // namespace
}  // namespace mfcon
