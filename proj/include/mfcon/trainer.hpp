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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfcon/features.hpp"
#include "mfcon/losses.hpp"
#include "mfcon/metrics.hpp"
#include "mfcon/model.hpp"

namespace mfcon {

struct TrainConfig {
  // Originals per batch; the augmented copies double it.
  int batch_size = 100;
  double lr = 1e-3;
  int lr_halve_every = 5;
  int epochs = 30;
  uint64_t seed = 0;
  double crop_seconds = 3.0;
  // Evaluate every this many steps (0: only after the last epoch).
  int eval_every = 0;
  Objective objective = Objective::kMFCon;
  LossConfig loss;
  AugmentOptions augment;

  void validate() const;
};

/// lr0 * 0.5^floor(epoch / lr_halve_every), epochs counted from 0.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Utterances with dense class labels (speaker ids sorted lexicographically).
struct Dataset {
  std::vector<Waveform> utterances;
  std::vector<int> labels;
  std::vector<std::string> speakers;

  size_t size() const { return utterances.size(); }
};

Dataset make_dataset(std::vector<Waveform> utterances);

/// 2B equal-length sequences: rows of originals first, then their augmented
/// counterparts in the same order.
struct Batch {
  // (2B * seg_len) x n_mels.
  Matrix features;
  int seg_len = 0;
  BatchLayout layout;
  std::vector<bool> is_augmented;

  size_t size() const { return layout.size(); }
};

Batch build_batch(const Dataset& data, std::span<const size_t> indices,
                  const Model& model, const Augmenter& augmenter,
                  const TrainConfig& cfg, uint64_t rng_seed);

/// Forward, loss, backward and one Adam update. Throws NumericalError (with
/// every loss component in the message) when the loss is not finite.
LossBreakdown train_step(Model& model, Adam& opt, const Batch& batch,
                         const TrainConfig& cfg, double lr, uint64_t step_seed);

/// Loss and parameter gradients for a batch without updating anything but
/// batch-norm statistics. Gradients are left in model.params().
LossBreakdown compute_gradients(Model& model, const Batch& batch,
                                const TrainConfig& cfg, uint64_t step_seed);

using UtteranceStore = std::unordered_map<std::string, Waveform>;

UtteranceStore make_store(std::span<const Waveform> utterances);

struct EvalResult {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double mindcf = 0.0;
  double mindcf_threshold = 0.0;
  TrialScoreSet scores;
};

/// Embeds every utterance referenced by the trials once (full length, eval
/// mode, no augmentation), scores the trials and computes EER and minDCF.
EvalResult evaluate(const Model& model, std::span<const Trial> trials,
                    const UtteranceStore& store);

struct StepRecord {
  int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(int64_t step, const EvalResult&)> on_eval;
  // Trials and audio for periodic evaluation; both optional.
  std::span<const Trial> trials;
  const UtteranceStore* store = nullptr;
};

struct TrainResult {
  std::vector<StepRecord> history;
  // Set when evaluation data was provided.
  std::optional<EvalResult> final_eval;
};

/// Plain-shuffled epochs of build_batch + train_step. Deterministic for a
/// fixed cfg.seed.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg,
                  const Augmenter& augmenter, const TrainHooks& hooks = {});

// JSON-lines record for one step.
std::string step_record_json(const StepRecord& r);

}  // namespace mfcon
