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

#include "mfcon/pipeline.hpp"

#include "mfcon/errors.hpp"

namespace mfcon {

RunData synthetic_run_data(const RunConfig& cfg) {
  RunData d;
  d.train = generate_corpus(cfg.synth);
  if (cfg.eval.n_target + cfg.eval.n_nontarget > 0) {
    SynthSpec held = cfg.synth;
    held.first_utterance = cfg.synth.first_utterance +
                           cfg.synth.utts_per_speaker;
    held.utts_per_speaker = cfg.eval.utts_per_speaker;
    d.eval = generate_corpus(held);
    d.trials = generate_trials(d.eval, cfg.eval.n_target,
                               cfg.eval.n_nontarget, cfg.eval.trial_seed);
  }
  return d;
}

RunData load_run_data(const RunConfig& cfg) {
  if (cfg.data.train_manifest.empty()) {
    if (!cfg.data.eval_manifest.empty() || !cfg.data.trials.empty()) {
      throw ConfigError("data.eval_manifest/trials need data.train_manifest");
    }
    return synthetic_run_data(cfg);
  }
  RunData d;
  d.train = load_manifest_audio(read_manifest(cfg.data.train_manifest));
  if (d.train.empty()) throw DataError("training manifest is empty");
  if (cfg.data.trials.empty() != cfg.data.eval_manifest.empty()) {
    throw ConfigError("data.eval_manifest and data.trials go together");
  }
  if (!cfg.data.trials.empty()) {
    d.eval = load_manifest_audio(read_manifest(cfg.data.eval_manifest));
    d.trials = read_trial_list(cfg.data.trials);
    // Fail early, naming every id the trial list cannot resolve.
    std::vector<std::string> missing;
    const UtteranceStore store = make_store(d.eval);
    for (const Trial& t : d.trials) {
      for (const std::string* id : {&t.enroll_utt, &t.test_utt}) {
        if (!store.count(*id)) missing.push_back(*id);
      }
    }
    if (!missing.empty()) {
      std::string msg = "trial ids missing from the eval manifest:";
      for (const auto& id : missing) msg += " " + id;
      throw LookupError(msg);
    }
  }
  for (const Waveform& w : d.train) {
    if (w.sample_rate != cfg.model.sample_rate) {
      throw DataError(w.utterance_id + " has sample rate " +
                      std::to_string(w.sample_rate) + ", expected " +
                      std::to_string(cfg.model.sample_rate));
    }
  }
  return d;
}

Augmenter make_augmenter(const RunConfig& cfg) {
  Augmenter a(cfg.train.augment, cfg.model.sample_rate);
  if (!cfg.data.noise_dir.empty()) a.load_noise_dir(cfg.data.noise_dir);
  if (!cfg.data.ir_dir.empty()) a.load_ir_dir(cfg.data.ir_dir);
  return a;
}

RunOutcome run_training(const RunConfig& cfg, const RunData& data,
                        const TrainHooks& hooks) {
  Dataset ds = make_dataset(data.train);
  ModelConfig mc = cfg.model;
  mc.num_classes = static_cast<int>(ds.speakers.size());
  Model model(mc, mix_seed(cfg.train.seed, 0x30DE1));
  const UtteranceStore store = make_store(data.eval);
  TrainHooks h = hooks;
  if (!data.trials.empty()) {
    h.trials = data.trials;
    h.store = &store;
  }
  TrainResult r = train(model, ds, cfg.train, make_augmenter(cfg), h);
  return {std::move(model), std::move(r)};
}

}  // namespace mfcon
