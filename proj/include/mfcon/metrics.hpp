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

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfcon/tensor.hpp"

namespace mfcon {

struct Trial {
  std::string enroll_utt;
  std::string test_utt;
  bool is_target = false;
};

struct TrialScoreSet {
  std::vector<double> scores;
  std::vector<bool> is_target;

  size_t size() const { return scores.size(); }
};

struct OperatingPoint {
  double value = 0.0;
  double threshold = 0.0;
};

/// Cosine of the angle between e1 and e2.
double cosine_score(const Vector& e1, const Vector& e2);

/// Equal error rate under "accept iff score >= threshold". Operating points
/// are taken at every distinct score plus reject-all; the crossing of miss
/// and false-alarm rates is linearly interpolated between adjacent points
/// (the threshold is interpolated the same way).
OperatingPoint compute_eer(const TrialScoreSet& s);

/// Normalized minimum detection cost:
///   min_t [c_miss p P_miss(t) + c_fa (1-p) P_fa(t)] / min(c_miss p, c_fa (1-p))
OperatingPoint compute_mindcf(const TrialScoreSet& s, double p_target = 0.01,
                              double c_miss = 1.0, double c_fa = 1.0);

using EmbeddingLookup = std::function<const Vector*(const std::string&)>;

/// Scores each trial by cosine similarity; order is preserved. Missing ids
/// raise LookupError naming every missing id.
TrialScoreSet score_trials(std::span<const Trial> trials,
                           const EmbeddingLookup& lookup);
TrialScoreSet score_trials(
    std::span<const Trial> trials,
    const std::unordered_map<std::string, Vector>& store);

// `<label> <enroll> <test>` per line, label in {0, 1}.
std::vector<Trial> read_trial_list(const std::filesystem::path& path);
void write_trial_list(const std::filesystem::path& path,
                      std::span<const Trial> trials);

// `<score> <label>` per line, score with 6 decimals.
void write_scores(const std::filesystem::path& path, const TrialScoreSet& s);

}  // namespace mfcon
