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
#include <filesystem>
#include <string>

#include "mfcon/model.hpp"
#include "mfcon/synthdata.hpp"
#include "mfcon/trainer.hpp"

namespace mfcon {

// Held-out evaluation on the synthetic corpus: new utterances of the training
// speakers, scored on a fixed trial list.
struct EvalSpec {
  int utts_per_speaker = 20;
  int n_target = 250;
  int n_nontarget = 250;
  uint64_t trial_seed = 0;

  void validate() const;
};

// Paths for file-based runs. Empty means unused.
struct DataPaths {
  std::string train_manifest;
  std::string eval_manifest;
  std::string trials;
  std::string noise_dir;
  std::string ir_dir;
};

/// Everything a run needs. Serialized as JSON with the sections "model",
/// "train", "synth", "eval" and "data"; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthSpec synth;
  EvalSpec eval;
  DataPaths data;

  void validate() const;

  // 2 blocks of width 64, 0.5 s crops, 25 originals per batch, 30 epochs.
  static RunConfig desk_scale();
};

std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

std::string to_json(const RunConfig& cfg, int indent = 2);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mfcon
