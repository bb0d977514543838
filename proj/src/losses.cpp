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

#include "mfcon/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mfcon/errors.hpp"

namespace mfcon {

void LossConfig::validate() const {
  if (!(temperature > 0)) throw ConfigError("loss.temperature must be > 0");
  if (!(scale > 0)) throw ConfigError("loss.scale must be > 0");
  if (!(margin >= 0)) throw ConfigError("loss.margin must be >= 0");
  if (!(lambda >= 0) || !(lambda1 >= 0) || !(lambda2 >= 0)) {
    throw ConfigError("loss coefficients must be >= 0");
  }
  if (!(triplet_margin >= 0)) {
    throw ConfigError("loss.triplet_margin must be >= 0");
  }
}

std::string to_string(MarginStyle v) {
  return v == MarginStyle::kCosineAdditive ? "cosine_additive"
                                           : "angular_additive";
}

std::string to_string(ContrastiveKind v) {
  switch (v) {
    case ContrastiveKind::kSupCon: return "supcon";
    case ContrastiveKind::kNTXent: return "ntxent";
    case ContrastiveKind::kTriplet: return "triplet";
    case ContrastiveKind::kNPair: return "npair";
  }
  return "?";
}

std::string to_string(Objective v) {
  switch (v) {
    case Objective::kAmSoftmax: return "am_softmax";
    case Objective::kAmSupCon: return "am_supcon";
    case Objective::kMFCon: return "mfcon";
    case Objective::kCombined: return "combined";
  }
  return "?";
}

MarginStyle parse_margin_style(const std::string& s) {
  if (s == "cosine_additive") return MarginStyle::kCosineAdditive;
  if (s == "angular_additive") return MarginStyle::kAngularAdditive;
  throw ConfigError("unknown margin style: " + s);
}

ContrastiveKind parse_contrastive_kind(const std::string& s) {
  if (s == "supcon") return ContrastiveKind::kSupCon;
  if (s == "ntxent") return ContrastiveKind::kNTXent;
  if (s == "triplet") return ContrastiveKind::kTriplet;
  if (s == "npair") return ContrastiveKind::kNPair;
  throw ConfigError("unknown contrastive kind: " + s);
}

Objective parse_objective(const std::string& s) {
  if (s == "am_softmax") return Objective::kAmSoftmax;
  if (s == "am_supcon") return Objective::kAmSupCon;
  if (s == "mfcon") return Objective::kMFCon;
  if (s == "combined") return Objective::kCombined;
  throw ConfigError("unknown loss: " + s);
}

std::pair<double, double> objective_lambdas(Objective obj,
                                            const LossConfig& cfg) {
  switch (obj) {
    case Objective::kAmSoftmax: return {0.0, 0.0};
    case Objective::kAmSupCon: return {0.0, cfg.lambda};
    case Objective::kMFCon: return {cfg.lambda, 0.0};
    case Objective::kCombined: return {cfg.lambda1, cfg.lambda2};
  }
  return {0.0, 0.0};
}

namespace {

void check_labels(const Matrix& z, std::span<const int> labels,
                  const char* op) {
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(z.rows()) + " rows");
  }
}

// Rows divided by their norms; norms returned through `norms`.
Matrix normalize_rows(const Matrix& x, Vector& norms, const char* op) {
  norms = x.rowwise().norm();
  if ((norms.array() <= 0.0).any()) {
    throw DegenerateInputError(std::string(op) + ": zero-norm row");
  }
  return x.array().colwise() / norms.array();
}

// Pulls a gradient w.r.t. x/|x| back to x.
Matrix normalize_rows_backward(const Matrix& unit, const Vector& norms,
                               const Matrix& g) {
  const Vector proj = unit.cwiseProduct(g).rowwise().sum();
  Matrix dx = g - (unit.array().colwise() * proj.array()).matrix();
  return dx.array().colwise() / norms.array();
}

// log-sum-exp over the entries of `row` where mask is true.
double masked_lse(const RowVector& row, Eigen::Index skip) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < row.size(); ++a) {
    if (a != skip) mx = std::max(mx, row[a]);
  }
  double acc = 0.0;
  for (Eigen::Index a = 0; a < row.size(); ++a) {
    if (a != skip) acc += std::exp(row[a] - mx);
  }
  return mx + std::log(acc);
}

// Shared core of SupCon and NT-Xent. positives[i] lists the positives of
// anchor i; anchors with none are skipped. Returns the summed per-anchor
// losses and fills grad with d(sum)/dz.
double contrastive_core(const Matrix& z,
                        const std::vector<std::vector<int>>& positives,
                        double tau, Matrix& grad, int& counted) {
  const Eigen::Index n = z.rows();
  Matrix sim;
  sim.noalias() = z * z.transpose();
  sim /= tau;
  Matrix g = Matrix::Zero(n, n);
  double total = 0.0;
  counted = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pos = positives[i];
    if (pos.empty()) continue;
    ++counted;
    const RowVector row = sim.row(i);
    const double lse = masked_lse(row, i);
    double mean_pos = 0.0;
    for (int p : pos) mean_pos += row[p];
    mean_pos /= static_cast<double>(pos.size());
    total += lse - mean_pos;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) g(i, a) = std::exp(row[a] - lse);
    }
    const double w = 1.0 / static_cast<double>(pos.size());
    for (int p : pos) g(i, p) -= w;
  }
  grad.noalias() = (g + g.transpose()) * z;
  grad /= tau;
  return total;
}

}  // namespace

AmSoftmaxResult am_softmax(const Matrix& z, std::span<const int> labels,
                           const Matrix& w, const LossConfig& cfg) {
  check_labels(z, labels, "am_softmax");
  if (z.rows() < 1) throw ShapeError("am_softmax: empty batch");
  if (z.cols() != w.cols()) {
    throw ShapeError("am_softmax: embedding width " + std::to_string(z.cols()) +
                     " vs classifier width " + std::to_string(w.cols()));
  }
  const Eigen::Index n = z.rows(), k = w.rows();
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw LookupError("am_softmax: label " + std::to_string(y) +
                        " outside [0, " + std::to_string(k) + ")");
    }
  }
  Vector zn, wn;
  const Matrix zu = normalize_rows(z, zn, "am_softmax");
  const Matrix wu = normalize_rows(w, wn, "am_softmax");
  const Matrix cos = zu * wu.transpose();
  Matrix logits = cfg.scale * cos;
  // d(target logit)/d(cos_y).
  Vector target_slope(n);
  constexpr double kClamp = 1.0 - 1e-7;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    const double c = cos(i, y);
    if (cfg.margin_style == MarginStyle::kCosineAdditive) {
      logits(i, y) = cfg.scale * (c - cfg.margin);
      target_slope[i] = cfg.scale;
    } else {
      const double cc = std::clamp(c, -kClamp, kClamp);
      const double theta = std::acos(cc);
      logits(i, y) = cfg.scale * std::cos(theta + cfg.margin);
      target_slope[i] = cc == c ? cfg.scale * std::sin(theta + cfg.margin) /
                                      std::sin(theta)
                                : 0.0;
    }
  }
  AmSoftmaxResult out;
  Matrix dcos(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    Eigen::Index arg = 0;
    const double mx = logits.row(i).maxCoeff(&arg);
    const RowVector e = (logits.row(i).array() - mx).exp();
    // log1p keeps saturated losses such as log(1 + e^-54) representable.
    double rest = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != arg) rest += e[j];
    }
    out.value += std::log1p(rest) + (mx - logits(i, y));
    const RowVector p = e / (1.0 + rest);
    dcos.row(i) = cfg.scale * p / static_cast<double>(n);
    dcos(i, y) = target_slope[i] * (p[y] - 1.0) / static_cast<double>(n);
  }
  out.value /= static_cast<double>(n);
  out.grad_z = normalize_rows_backward(zu, zn, dcos * wu);
  out.grad_w = normalize_rows_backward(wu, wn, dcos.transpose() * zu);
  return out;
}

SupConResult supcon(const Matrix& z, std::span<const int> labels,
                    const LossConfig& cfg) {
  check_labels(z, labels, "supcon");
  const Eigen::Index n = z.rows();
  std::vector<std::vector<int>> positives(n);
  SupConResult out;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) {
        positives[i].push_back(static_cast<int>(p));
      }
    }
    if (positives[i].empty()) {
      if (cfg.supcon_error_on_missing_positive) {
        throw DataError("supcon: anchor " + std::to_string(i) +
                        " has no positive");
      }
      ++out.dropped_anchors;
    }
  }
  int counted = 0;
  out.value = contrastive_core(z, positives, cfg.temperature, out.grad, counted);
  if (cfg.supcon_mean_over_anchors && counted > 0) {
    out.value /= counted;
    out.grad /= counted;
  }
  return out;
}

LossValue ntxent(const Matrix& z, std::span<const int> pair_index,
                 const LossConfig& cfg) {
  const Eigen::Index n = z.rows();
  if (static_cast<Eigen::Index>(pair_index.size()) != n) {
    throw ShapeError("ntxent: pair index size mismatch");
  }
  std::vector<std::vector<int>> positives(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = pair_index[i];
    if (j < 0 || j >= n || j == i || pair_index[j] != i) {
      throw DataError("ntxent: row " + std::to_string(i) +
                      " is not part of a perfect pairing");
    }
    positives[i].push_back(j);
  }
  LossValue out;
  int counted = 0;
  out.value = contrastive_core(z, positives, cfg.temperature, out.grad, counted);
  out.value /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

LossValue triplet(const Matrix& z, std::span<const int> labels,
                  const LossConfig& cfg) {
  check_labels(z, labels, "triplet");
  const Eigen::Index n = z.rows();
  // Squared distances via the Gram matrix.
  const Matrix gram = z * z.transpose();
  const Vector sq = gram.diagonal();
  Matrix dist = (-2.0 * gram).colwise() + sq;
  dist.rowwise() += sq.transpose();

  LossValue out;
  out.grad = Matrix::Zero(n, z.cols());
  // Coefficients c_ab such that grad = sum over active triples of
  // 2 (z_n - z_p) on a, 2 (z_p - z_a) on p, 2 (z_a - z_n) on n.
  Matrix coeff = Matrix::Zero(n, n);
  int64_t valid = 0, active = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (Eigen::Index q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        ++valid;
        const double h = dist(a, p) - dist(a, q) + cfg.triplet_margin;
        if (h <= 0.0) continue;
        ++active;
        out.value += h;
        // d/dz of |a-p|^2 - |a-q|^2 expressed as pairwise pulls.
        coeff(a, p) += 1.0;
        coeff(a, q) -= 1.0;
      }
    }
  }
  if (valid == 0) throw DataError("triplet: batch has no valid triple");
  if (active == 0) return out;
  // |a-p|^2 contributes 2(a-p) to a and 2(p-a) to p; each coeff(a,b) term
  // c * |a-b|^2 therefore adds 2c(a-b) to a and 2c(b-a) to b.
  const Matrix sym = coeff + coeff.transpose();
  const Vector deg = sym.rowwise().sum();
  out.grad = 2.0 * ((z.array().colwise() * deg.array()).matrix() - sym * z);
  out.value /= static_cast<double>(active);
  out.grad /= static_cast<double>(active);
  return out;
}

LossValue npair(const Matrix& z, std::span<const int> labels,
                std::span<const std::pair<int, int>> pairs) {
  check_labels(z, labels, "npair");
  const Eigen::Index n = z.rows();
  const auto m = static_cast<Eigen::Index>(pairs.size());
  if (m == 0) throw DataError("npair: no (anchor, positive) pairs");
  std::set<int> classes;
  for (const auto& [a, p] : pairs) {
    if (a < 0 || p < 0 || a >= n || p >= n || a == p) {
      throw DataError("npair: invalid pair index");
    }
    if (labels[a] != labels[p]) {
      throw DataError("npair: anchor and positive labels differ");
    }
    if (!classes.insert(labels[a]).second) {
      throw DataError("npair: duplicate class " + std::to_string(labels[a]) +
                      " among anchors");
    }
  }
  Matrix anchors(m, z.cols()), positives(m, z.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    anchors.row(i) = z.row(pairs[i].first);
    positives.row(i) = z.row(pairs[i].second);
  }
  const Matrix logits = anchors * positives.transpose();
  Matrix g(m, m);
  LossValue out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const RowVector e = (logits.row(i).array() - mx).exp();
    const double sum = e.sum();
    out.value += mx + std::log(sum) - logits(i, i);
    g.row(i) = e / sum;
    g(i, i) -= 1.0;
  }
  g /= static_cast<double>(m);
  out.value /= static_cast<double>(m);
  const Matrix da = g * positives;
  const Matrix dp = g.transpose() * anchors;
  out.grad = Matrix::Zero(n, z.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    out.grad.row(pairs[i].first) += da.row(i);
    out.grad.row(pairs[i].second) += dp.row(i);
  }
  return out;
}

std::vector<std::pair<int, int>> npair_pairs(const BatchLayout& layout) {
  if (layout.pair_index.size() != layout.labels.size()) {
    throw DataError("npair: batch has no original/augmented pairing");
  }
  std::vector<std::pair<int, int>> pairs;
  std::set<int> seen;
  for (size_t i = 0; i < layout.labels.size(); ++i) {
    if (seen.insert(layout.labels[i]).second) {
      pairs.emplace_back(static_cast<int>(i), layout.pair_index[i]);
    }
  }
  return pairs;
}

LossValue contrastive_loss(const Matrix& z, const BatchLayout& layout,
                           const LossConfig& cfg) {
  switch (cfg.contrastive_kind) {
    case ContrastiveKind::kSupCon: {
      SupConResult r = supcon(z, layout.labels, cfg);
      return {r.value, std::move(r.grad)};
    }
    case ContrastiveKind::kNTXent:
      return ntxent(z, layout.pair_index, cfg);
    case ContrastiveKind::kTriplet:
      return triplet(z, layout.labels, cfg);
    case ContrastiveKind::kNPair:
      return npair(z, layout.labels, npair_pairs(layout));
  }
  throw ConfigError("unknown contrastive kind");
}

CompositeResult composite_loss(std::span<const Matrix> taps,
                               const Matrix& speaker, const BatchLayout& layout,
                               const Matrix& w, const LossConfig& cfg,
                               double lambda1, double lambda2) {
  CompositeResult out;
  LossBreakdown& br = out.breakdown;
  br.lambda1 = lambda1;
  br.lambda2 = lambda2;

  AmSoftmaxResult ams = am_softmax(speaker, layout.labels, w, cfg);
  br.ams = ams.value;
  out.grad_speaker = std::move(ams.grad_z);
  out.grad_classifier = std::move(ams.grad_w);

  double tap_sum = 0.0;
  if (!taps.empty()) {
    const double weight = lambda1 / static_cast<double>(taps.size());
    for (const Matrix& t : taps) {
      if (t.rows() != speaker.rows()) {
        throw ShapeError("tap embeddings and speaker embeddings disagree on "
                         "batch size");
      }
      if (cfg.contrastive_kind == ContrastiveKind::kSupCon) {
        SupConResult r = supcon(t, layout.labels, cfg);
        br.dropped_anchors += r.dropped_anchors;
        br.contrastive.push_back(r.value);
        out.grad_taps.push_back(weight * r.grad);
      } else {
        LossValue r = contrastive_loss(t, layout, cfg);
        br.contrastive.push_back(r.value);
        out.grad_taps.push_back(weight * r.grad);
      }
      tap_sum += br.contrastive.back();
    }
    tap_sum /= static_cast<double>(taps.size());
  }

  if (lambda2 != 0.0) {
    Vector norms;
    const Matrix unit = normalize_rows(speaker, norms, "speaker supcon");
    SupConResult r = supcon(unit, layout.labels, cfg);
    br.dropped_anchors += r.dropped_anchors;
    br.speaker_supcon = r.value;
    out.grad_speaker +=
        lambda2 * normalize_rows_backward(unit, norms, r.grad);
  }
  br.total = br.ams + lambda1 * tap_sum + lambda2 * br.speaker_supcon;
  return out;
}

CompositeResult mfcon(std::span<const Matrix> taps, const Matrix& speaker,
                      const BatchLayout& layout, const Matrix& w,
                      const LossConfig& cfg) {
  return composite_loss(taps, speaker, layout, w, cfg, cfg.lambda, 0.0);
}

CompositeResult combined(std::span<const Matrix> taps, const Matrix& speaker,
                         const BatchLayout& layout, const Matrix& w,
                         const LossConfig& cfg) {
  return composite_loss(taps, speaker, layout, w, cfg, cfg.lambda1,
                        cfg.lambda2);
}

}  // namespace mfcon
