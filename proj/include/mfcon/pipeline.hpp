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

#include <functional>
#include <optional>
#include <vector>

#include "mfcon/config.hpp"

namespace mfcon {

/// Training utterances plus optional held-out evaluation data.
struct RunData {
  std::vector<Waveform> train;
  std::vector<Waveform> eval;
  std::vector<Trial> trials;
};

/// Synthetic benchmark: cfg.synth for training and, for evaluation, the next
/// eval.utts_per_speaker utterances of the same speakers with a seeded trial
/// list.
RunData synthetic_run_data(const RunConfig& cfg);

/// From cfg.data manifests when data.train_manifest is set, otherwise the
/// synthetic benchmark. Everything is validated before returning.
RunData load_run_data(const RunConfig& cfg);

Augmenter make_augmenter(const RunConfig& cfg);

struct RunOutcome {
  Model model;
  TrainResult result;
};

/// Builds a fresh model sized to the training speakers and trains it.
RunOutcome run_training(const RunConfig& cfg, const RunData& data,
                        const TrainHooks& hooks = {});

}  // namespace mfcon
