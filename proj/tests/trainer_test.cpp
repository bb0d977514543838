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

#include "mfcon/trainer.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

#include "mfcon/errors.hpp"
#include "mfcon/synthdata.hpp"
#include "test_util.hpp"

namespace mfcon {
namespace {

using testing::SameMatrix;

ModelConfig toy_model_config(int classes) {
  ModelConfig c;
  c.fbank.n_mels = 16;
  c.encoder.n_mels = 16;
  c.encoder.num_blocks = 2;
  c.encoder.model_dim = 16;
  c.encoder.num_heads = 2;
  c.encoder.ff_expansion = 2;
  c.encoder.conv_kernel = 3;
  c.head.embed_dim = 8;
  c.head.speaker_dim = 8;
  c.head.attention_hidden = 4;
  c.num_classes = classes;
  return c;
}

TrainConfig toy_train_config() {
  TrainConfig t;
  t.batch_size = 4;
  t.crop_seconds = 0.3;
  t.epochs = 2;
  return t;
}

Dataset toy_dataset(int speakers = 4, int utts = 3, uint64_t seed = 0) {
  SynthSpec s;
  s.n_speakers = speakers;
  s.utts_per_speaker = utts;
  s.duration = 0.6;
  s.seed = seed;
  return make_dataset(generate_corpus(s));
}

std::vector<size_t> first_indices(size_t n) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void expect_same_params(const ParameterStore& a, const ParameterStore& b,
                        bool trainable_only) {
  for (const auto& [name, p] : a) {
    if (trainable_only && !p.trainable) continue;
    EXPECT_TRUE(SameMatrix(p.value, b.at(name).value)) << name;
  }
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig().validate());
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig();
  t.lr = 0;
  EXPECT_NO_THROW(t.validate());
  t.lr = -1e-3;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig();
  t.crop_seconds = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(LrSchedule, HalvesEveryFiveEpochs) {
  const TrainConfig t;
  EXPECT_EQ(lr_schedule(0, t), 0.001);
  EXPECT_EQ(lr_schedule(4, t), 0.001);
  EXPECT_EQ(lr_schedule(5, t), 0.0005);
  EXPECT_EQ(lr_schedule(9, t), 0.0005);
  EXPECT_EQ(lr_schedule(10, t), 0.00025);
}

TEST(Dataset, DenseSortedLabels) {
  std::vector<Waveform> w(4);
  const char* spk[] = {"zed", "amy", "zed", "bob"};
  for (int i = 0; i < 4; ++i) {
    w[i].speaker_id = spk[i];
    w[i].utterance_id = "u" + std::to_string(i);
  }
  const Dataset d = make_dataset(w);
  EXPECT_EQ(d.speakers, (std::vector<std::string>{"amy", "bob", "zed"}));
  EXPECT_EQ(d.labels, (std::vector<int>{2, 0, 2, 1}));
}

TEST(BuildBatch, DoublesAndPairsRows) {
  const Dataset data = toy_dataset();
  const Model model(toy_model_config(4), 1);
  const Augmenter aug;
  const TrainConfig cfg = toy_train_config();
  const auto idx = first_indices(4);
  const Batch b = build_batch(data, idx, model, aug, cfg, 9);
  ASSERT_EQ(b.size(), 8u);
  EXPECT_EQ(b.seg_len, 28);
  EXPECT_EQ(b.features.rows(), 8 * 28);
  EXPECT_EQ(b.features.cols(), 16);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(b.layout.labels[i], data.labels[i]);
    EXPECT_EQ(b.layout.labels[4 + i], data.labels[i]);
    EXPECT_EQ(b.layout.pair_index[i], 4 + i);
    EXPECT_EQ(b.layout.pair_index[4 + i], i);
    EXPECT_FALSE(b.is_augmented[i]);
    EXPECT_TRUE(b.is_augmented[4 + i]);
    EXPECT_FALSE(SameMatrix(b.features.middleRows(i * 28, 28),
                            b.features.middleRows((4 + i) * 28, 28)));
  }
  const Batch again = build_batch(data, idx, model, aug, cfg, 9);
  EXPECT_TRUE(SameMatrix(b.features, again.features));
  const Batch other = build_batch(data, idx, model, aug, cfg, 10);
  EXPECT_FALSE(SameMatrix(b.features, other.features));
}

TEST(BuildBatch, FullBatchSizeDoublesTo200) {
  const Dataset data = toy_dataset(10, 10);
  const Model model(toy_model_config(10), 1);
  TrainConfig cfg = toy_train_config();
  cfg.batch_size = 100;
  cfg.crop_seconds = 0.1;
  const Batch b =
      build_batch(data, first_indices(100), model, Augmenter(), cfg, 0);
  EXPECT_EQ(b.size(), 200u);
}

TEST(BuildBatch, SingleOriginalGivesAWellDefinedPair) {
  const Dataset data = toy_dataset();
  const Model model(toy_model_config(4), 1);
  TrainConfig cfg = toy_train_config();
  cfg.batch_size = 1;
  const Batch b = build_batch(data, first_indices(1), model, Augmenter(), cfg, 2);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.layout.labels[0], b.layout.labels[1]);
  Rng rng(2);
  const Matrix z = testing::unit_rows(testing::random_matrix(2, 8, rng));
  EXPECT_NEAR(supcon(z, b.layout.labels, cfg.loss).value, 0.0, 1e-12);
  Model m2(toy_model_config(4), 1);
  Adam opt;
  EXPECT_TRUE(std::isfinite(train_step(m2, opt, b, cfg, 1e-3, 0).total));
}

TEST(BuildBatch, Errors) {
  const Dataset data = toy_dataset();
  const Model model(toy_model_config(4), 1);
  const std::vector<size_t> none;
  EXPECT_THROW(build_batch(data, none, model, Augmenter(), toy_train_config(), 0),
               DataError);
  const std::vector<size_t> bad = {99};
  EXPECT_THROW(build_batch(data, bad, model, Augmenter(), toy_train_config(), 0),
               DataError);
}

TEST(TrainStep, ZeroLearningRateLeavesParametersUnchanged) {
  const Dataset data = toy_dataset();
  Model model(toy_model_config(4), 3);
  const ParameterStore before = model.params();
  const TrainConfig cfg = toy_train_config();
  const Batch b = build_batch(data, first_indices(4), model, Augmenter(), cfg, 3);
  Adam opt;
  train_step(model, opt, b, cfg, 0.0, 0);
  train_step(model, opt, b, cfg, 0.0, 0);
  expect_same_params(before, model.params(), true);
}

TEST(TrainStep, SmallStepDescendsOnTheSameBatch) {
  const Dataset data = toy_dataset();
  TrainConfig cfg = toy_train_config();
  int descended = 0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    Model model(toy_model_config(4), 100 + seed);
    const Batch b = build_batch(data, first_indices(4), model, Augmenter(), cfg,
                                static_cast<uint64_t>(seed));
    Adam opt;
    const double before = train_step(model, opt, b, cfg, 1e-4, 5).total;
    const double after = compute_gradients(model, b, cfg, 5).total;
    descended += after < before;
  }
  EXPECT_GE(descended, 19) << descended << " / " << trials;
}

TEST(ComputeGradients, ZeroLambdasMatchPlainAmSoftmax) {
  const Dataset data = toy_dataset();
  TrainConfig cfg = toy_train_config();
  const Model init(toy_model_config(4), 4);
  const Batch b = build_batch(data, first_indices(4), init, Augmenter(), cfg, 4);
  auto grads = [&](Objective obj, double lambda, double l1, double l2) {
    Model m = init;
    TrainConfig c = cfg;
    c.objective = obj;
    c.loss.lambda = lambda;
    c.loss.lambda1 = l1;
    c.loss.lambda2 = l2;
    compute_gradients(m, b, c, 7);
    return m.params();
  };
  const ParameterStore ref = grads(Objective::kAmSoftmax, 0.5, 0.5, 0.5);
  for (const ParameterStore& other :
       {grads(Objective::kMFCon, 0.0, 0.5, 0.5),
        grads(Objective::kCombined, 0.5, 0.0, 0.0),
        grads(Objective::kAmSupCon, 0.0, 0.5, 0.5)}) {
    for (const auto& [name, p] : ref) {
      if (!p.trainable) continue;
      EXPECT_TRUE(SameMatrix(p.grad, other.at(name).grad)) << name;
    }
  }
}

TEST(ComputeGradients, EndToEndFiniteDifferences) {
  const Dataset data = toy_dataset();
  TrainConfig cfg = toy_train_config();
  cfg.objective = Objective::kCombined;
  cfg.loss.lambda1 = 0.5;
  cfg.loss.lambda2 = 0.5;
  cfg.loss.scale = 5.0;
  const Model init(toy_model_config(4), 5);
  const Batch b = build_batch(data, first_indices(4), init, Augmenter(), cfg, 5);
  Model work = init;
  compute_gradients(work, b, cfg, 11);
  Rng rng(5);
  const char* arrays[] = {"classifier.weight", "mfa.proj.w", "head.0.proj.w",
                          "head.1.attn.w",     "blocks.0.mhsa.q.w",
                          "blocks.1.ff2.fc1.w", "frontend.conv.w"};
  for (const char* name : arrays) {
    const Matrix& value = init.params().at(name).value;
    Vector ana(6), num(6);
    for (int j = 0; j < 6; ++j) {
      const auto k = static_cast<Eigen::Index>(uniform_index(rng, value.size()));
      auto eval = [&](double delta) {
        Model m = init;
        m.params().at(name).value.data()[k] += delta;
        return compute_gradients(m, b, cfg, 11).total;
      };
      const double h = 1e-6;
      num[j] = (eval(h) - eval(-h)) / (2 * h);
      ana[j] = work.params().at(name).grad.data()[k];
    }
    EXPECT_LT(testing::relative_error(ana, num, 1e-6), 1e-4) << name;
  }
}

TEST(ComputeGradients, NonFiniteLossIsANumericalError) {
  const Dataset data = toy_dataset();
  const TrainConfig cfg = toy_train_config();
  Model model(toy_model_config(4), 6);
  Batch b = build_batch(data, first_indices(4), model, Augmenter(), cfg, 6);
  b.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    compute_gradients(model, b, cfg, 0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("ams="), std::string::npos);
  }
  Adam opt;
  EXPECT_THROW(train_step(model, opt, b, cfg, 1e-3, 0), NumericalError);
}

TEST(Evaluate, IdempotentAndChecksIds) {
  SynthSpec s;
  s.n_speakers = 3;
  s.utts_per_speaker = 3;
  s.duration = 0.5;
  const auto corpus = generate_corpus(s);
  const auto trials = generate_trials(corpus, 6, 6, 0);
  const UtteranceStore store = make_store(corpus);
  const Model model(toy_model_config(3), 7);
  const EvalResult a = evaluate(model, trials, store);
  const EvalResult b = evaluate(model, trials, store);
  EXPECT_EQ(a.eer, b.eer);
  EXPECT_EQ(a.mindcf, b.mindcf);
  EXPECT_EQ(a.scores.scores, b.scores.scores);
  ASSERT_EQ(a.scores.size(), trials.size());
  std::vector<Trial> broken = trials;
  broken[0].enroll_utt = "ghost-1";
  broken[3].test_utt = "ghost-2";
  try {
    evaluate(model, broken, store);
    FAIL() << "expected LookupError";
  } catch (const LookupError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ghost-1"), std::string::npos);
    EXPECT_NE(msg.find("ghost-2"), std::string::npos);
  }
  std::vector<Waveform> dup = {corpus[0], corpus[0]};
  EXPECT_THROW(make_store(dup), DataError);
}

// An untrained model on the default synthetic benchmark sits near chance.
TEST(Evaluate, UntrainedModelIsNearChance) {
  SynthSpec s;
  s.first_utterance = s.utts_per_speaker;
  const auto corpus = generate_corpus(s);
  const auto trials = generate_trials(corpus, 250, 250, 0);
  ModelConfig mc;
  mc.encoder.num_blocks = 2;
  mc.num_classes = 10;
  for (uint64_t seed = 0; seed < 2; ++seed) {
    const Model model(mc, seed);
    const double eer = evaluate(model, trials, make_store(corpus)).eer;
    EXPECT_GT(eer, 0.35) << "seed " << seed;
    EXPECT_LT(eer, 0.65) << "seed " << seed;
  }
}

TEST(Train, DeterministicLossCurves) {
  const Dataset data = toy_dataset();
  const TrainConfig cfg = toy_train_config();
  auto run = [&](uint64_t seed) {
    Model model(toy_model_config(4), 8);
    TrainConfig c = cfg;
    c.seed = seed;
    std::vector<double> totals;
    for (const StepRecord& r : train(model, data, c, Augmenter()).history) {
      totals.push_back(r.loss.total);
    }
    return totals;
  };
  const auto a = run(1);
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(a, run(1));
  EXPECT_NE(a, run(2));
}

TEST(Train, BookkeepingHooksAndEvaluation) {
  const Dataset data = toy_dataset();
  TrainConfig cfg = toy_train_config();
  cfg.objective = Objective::kCombined;
  cfg.eval_every = 2;
  std::vector<Waveform> eval_utts = data.utterances;
  const auto trials = generate_trials(eval_utts, 6, 6, 0);
  const UtteranceStore store = make_store(eval_utts);
  int steps = 0;
  std::vector<int64_t> eval_steps;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord&) { ++steps; };
  hooks.on_eval = [&](int64_t step, const EvalResult&) {
    eval_steps.push_back(step);
  };
  hooks.trials = trials;
  hooks.store = &store;
  Model model(toy_model_config(4), 9);
  const TrainResult r = train(model, data, cfg, Augmenter(), hooks);
  EXPECT_EQ(steps, 6);
  ASSERT_TRUE(r.final_eval.has_value());
  EXPECT_GE(eval_steps.size(), 3u);
  for (const StepRecord& s : r.history) {
    const LossBreakdown& b = s.loss;
    ASSERT_EQ(b.contrastive.size(), 2u);
    EXPECT_EQ(b.total, b.ams +
                           b.lambda1 * ((b.contrastive[0] + b.contrastive[1]) / 2.0) +
                           b.lambda2 * b.speaker_supcon);
    EXPECT_EQ(s.lr, lr_schedule(s.epoch, cfg));
    const auto j = nlohmann::json::parse(step_record_json(s));
    EXPECT_EQ(j.at("step").get<int64_t>(), s.step);
    EXPECT_EQ(j.at("total").get<double>(), b.total);
    EXPECT_EQ(j.at("contrastive").size(), 2u);
    EXPECT_EQ(j.at("lambda1").get<double>(), 0.03);
  }
}

TEST(Train, TooManySpeakersForTheClassifier) {
  const Dataset data = toy_dataset(4, 3);
  Model model(toy_model_config(3), 10);
  EXPECT_THROW(train(model, data, toy_train_config(), Augmenter()), ConfigError);
}

}  // namespace
}  // namespace mfcon
