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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfcon/tensor.hpp"

namespace mfcon {

enum class MarginStyle {
  // s * (cos(theta_y) - m): the AM-Softmax convention.
  kCosineAdditive,
  // s * cos(theta_y + m): additive angular margin.
  kAngularAdditive,
};

enum class ContrastiveKind { kSupCon, kNTXent, kTriplet, kNPair };

// Which terms of the training objective are active.
enum class Objective { kAmSoftmax, kAmSupCon, kMFCon, kCombined };

struct LossConfig {
  double margin = 0.2;
  double scale = 30.0;
  double temperature = 0.07;
  // Coefficient of the per-block contrastive mean (mfcon) and of the
  // speaker-level SupCon term (am_supcon).
  double lambda = 0.01;
  // Combined objective: per-block and speaker-level coefficients.
  double lambda1 = 0.03;
  double lambda2 = 0.03;
  MarginStyle margin_style = MarginStyle::kCosineAdditive;
  ContrastiveKind contrastive_kind = ContrastiveKind::kSupCon;
  double triplet_margin = 0.2;
  // SupCon sums over anchors by default; this divides by the anchor count.
  bool supcon_mean_over_anchors = false;
  // Anchors without a positive are skipped (and counted) unless this is set.
  bool supcon_error_on_missing_positive = false;

  void validate() const;
};

std::string to_string(MarginStyle v);
std::string to_string(ContrastiveKind v);
std::string to_string(Objective v);
MarginStyle parse_margin_style(const std::string& s);
ContrastiveKind parse_contrastive_kind(const std::string& s);
Objective parse_objective(const std::string& s);

// (per-block coefficient, speaker-level SupCon coefficient) for an objective.
std::pair<double, double> objective_lambdas(Objective obj,
                                            const LossConfig& cfg);

/// Labels plus the original/augmented pairing of a doubled batch.
/// pair_index[i] is the row holding i's counterpart (or empty when the
/// batch carries no pairing).
struct BatchLayout {
  std::vector<int> labels;
  std::vector<int> pair_index;

  size_t size() const { return labels.size(); }
};

struct LossValue {
  double value = 0.0;
  Matrix grad;
};

struct AmSoftmaxResult {
  double value = 0.0;
  Matrix grad_z;
  Matrix grad_w;
};

struct SupConResult {
  double value = 0.0;
  Matrix grad;
  int dropped_anchors = 0;
};

/// Mean cross-entropy over scaled cosine logits with an additive margin on
/// the target class. z is N x D (any norm), w is K x D class vectors.
AmSoftmaxResult am_softmax(const Matrix& z, std::span<const int> labels,
                           const Matrix& w, const LossConfig& cfg);

/// Supervised contrastive loss on unit rows, summed over anchors:
///   sum_i -1/|P(i)| sum_{p in P(i)} log softmax_{a != i}(z_i.z_a / tau)[p]
SupConResult supcon(const Matrix& z, std::span<const int> labels,
                    const LossConfig& cfg);

/// NT-Xent: each row's only positive is its counterpart; mean over rows.
LossValue ntxent(const Matrix& z, std::span<const int> pair_index,
                 const LossConfig& cfg);

/// Batch-all triplet loss with squared Euclidean distance. Averages over
/// triplets with positive loss.
LossValue triplet(const Matrix& z, std::span<const int> labels,
                  const LossConfig& cfg);

/// N-pair loss over (anchor, positive) row pairs, one per class.
LossValue npair(const Matrix& z, std::span<const int> labels,
                std::span<const std::pair<int, int>> pairs);

// First row of every class that has a counterpart, paired with it.
std::vector<std::pair<int, int>> npair_pairs(const BatchLayout& layout);

// Dispatch on cfg.contrastive_kind.
LossValue contrastive_loss(const Matrix& z, const BatchLayout& layout,
                           const LossConfig& cfg);

struct LossBreakdown {
  double total = 0.0;
  double ams = 0.0;
  // One contrastive value per block (empty when taps were not computed).
  std::vector<double> contrastive;
  double speaker_supcon = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  // SupCon anchors skipped for lack of a positive, over all terms.
  int dropped_anchors = 0;
};

struct CompositeResult {
  LossBreakdown breakdown;
  Matrix grad_speaker;
  Matrix grad_classifier;
  std::vector<Matrix> grad_taps;
};

/// ams(speaker) + lambda1 * mean_i contrastive(tap_i)
///              + lambda2 * supcon(normalize(speaker)).
/// Tap embeddings must already be unit rows; the speaker embedding is raw.
CompositeResult composite_loss(std::span<const Matrix> taps,
                               const Matrix& speaker, const BatchLayout& layout,
                               const Matrix& w, const LossConfig& cfg,
                               double lambda1, double lambda2);

// composite_loss with (cfg.lambda, 0).
CompositeResult mfcon(std::span<const Matrix> taps, const Matrix& speaker,
                      const BatchLayout& layout, const Matrix& w,
                      const LossConfig& cfg);

// composite_loss with (cfg.lambda1, cfg.lambda2).
CompositeResult combined(std::span<const Matrix> taps, const Matrix& speaker,
                         const BatchLayout& layout, const Matrix& w,
                         const LossConfig& cfg);

}  // namespace mfcon
