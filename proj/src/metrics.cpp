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

#include "mfcon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mfcon/errors.hpp"

namespace mfcon {

double cosine_score(const Vector& e1, const Vector& e2) {
  if (e1.size() != e2.size()) {
    throw ShapeError("cosine_score: dimension mismatch");
  }
  const double n1 = e1.norm(), n2 = e2.norm();
  if (n1 == 0.0 || n2 == 0.0) {
    throw DegenerateInputError("cosine_score: zero vector");
  }
  return std::clamp(e1.dot(e2) / (n1 * n2), -1.0, 1.0);
}

namespace {

struct Rates {
  // Threshold, miss rate, false-alarm rate; ordered by increasing threshold.
  std::vector<double> threshold;
  std::vector<double> p_miss;
  std::vector<double> p_fa;
};

// Operating points at every distinct score and at +inf (reject all).
Rates sweep(const TrialScoreSet& s) {
  if (s.scores.size() != s.is_target.size()) {
    throw ShapeError("score set: scores and labels differ in length");
  }
  size_t n_tar = 0;
  for (bool t : s.is_target) n_tar += t ? 1 : 0;
  const size_t n_non = s.size() - n_tar;
  if (n_tar == 0 || n_non == 0) {
    throw DataError("score set needs at least one target and one nontarget");
  }
  for (double v : s.scores) {
    if (!std::isfinite(v)) throw DataError("score set has non-finite scores");
  }
  std::vector<size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return s.scores[a] < s.scores[b];
  });
  Rates r;
  // Misses: targets strictly below the threshold.
  size_t miss = 0, fa = n_non;
  size_t i = 0;
  while (i < order.size()) {
    const double t = s.scores[order[i]];
    r.threshold.push_back(t);
    r.p_miss.push_back(static_cast<double>(miss) / n_tar);
    r.p_fa.push_back(static_cast<double>(fa) / n_non);
    while (i < order.size() && s.scores[order[i]] == t) {
      if (s.is_target[order[i]]) {
        ++miss;
      } else {
        --fa;
      }
      ++i;
    }
  }
  r.threshold.push_back(std::numeric_limits<double>::infinity());
  r.p_miss.push_back(1.0);
  r.p_fa.push_back(0.0);
  return r;
}

}  // namespace

OperatingPoint compute_eer(const TrialScoreSet& s) {
  const Rates r = sweep(s);
  // p_miss rises and p_fa falls with the threshold, so diff = p_miss - p_fa
  // is nondecreasing; find the first point where it turns nonnegative.
  for (size_t k = 0; k < r.threshold.size(); ++k) {
    const double d = r.p_miss[k] - r.p_fa[k];
    if (d < 0.0) continue;
    if (d == 0.0 || k == 0) {
      return {0.5 * (r.p_miss[k] + r.p_fa[k]), r.threshold[k]};
    }
    const double d0 = r.p_miss[k - 1] - r.p_fa[k - 1];
    const double alpha = -d0 / (d - d0);
    const double eer =
        r.p_miss[k - 1] + alpha * (r.p_miss[k] - r.p_miss[k - 1]);
    const double t1 = std::isfinite(r.threshold[k]) ? r.threshold[k]
                                                    : r.threshold[k - 1];
    const double thr = r.threshold[k - 1] + alpha * (t1 - r.threshold[k - 1]);
    return {eer, thr};
  }
  // Unreachable: the reject-all point has p_miss - p_fa = 1.
  return {0.5, 0.0};
}

OperatingPoint compute_mindcf(const TrialScoreSet& s, double p_target,
                              double c_miss, double c_fa) {
  if (!(p_target > 0 && p_target < 1) || !(c_miss > 0) || !(c_fa > 0)) {
    throw ConfigError("minDCF parameters out of range");
  }
  const Rates r = sweep(s);
  const double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  OperatingPoint best{std::numeric_limits<double>::infinity(), 0.0};
  for (size_t k = 0; k < r.threshold.size(); ++k) {
    const double dcf = c_miss * p_target * r.p_miss[k] +
                       c_fa * (1.0 - p_target) * r.p_fa[k];
    if (dcf < best.value) best = {dcf, r.threshold[k]};
  }
  best.value /= norm;
  return best;
}

TrialScoreSet score_trials(std::span<const Trial> trials,
                           const EmbeddingLookup& lookup) {
  std::vector<std::string> missing;
  auto find = [&](const std::string& id) -> const Vector* {
    const Vector* v = lookup(id);
    if (v == nullptr &&
        std::find(missing.begin(), missing.end(), id) == missing.end()) {
      missing.push_back(id);
    }
    return v;
  };
  TrialScoreSet out;
  out.scores.reserve(trials.size());
  out.is_target.reserve(trials.size());
  for (const Trial& t : trials) {
    const Vector* a = find(t.enroll_utt);
    const Vector* b = find(t.test_utt);
    out.scores.push_back(a && b ? cosine_score(*a, *b) : 0.0);
    out.is_target.push_back(t.is_target);
  }
  if (!missing.empty()) {
    std::string msg = "missing embeddings for:";
    for (const auto& id : missing) msg += " " + id;
    throw LookupError(msg);
  }
  return out;
}

TrialScoreSet score_trials(
    std::span<const Trial> trials,
    const std::unordered_map<std::string, Vector>& store) {
  return score_trials(trials, [&](const std::string& id) -> const Vector* {
    auto it = store.find(id);
    return it == store.end() ? nullptr : &it->second;
  });
}

std::vector<Trial> read_trial_list(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open trial list " + path.string());
  std::vector<Trial> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string label;
    Trial t;
    if (!(ls >> label)) continue;
    if (!(ls >> t.enroll_utt >> t.test_utt) || (label != "0" && label != "1")) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected '<0|1> <enroll> <test>'");
    }
    t.is_target = label == "1";
    out.push_back(std::move(t));
  }
  return out;
}

void write_trial_list(const std::filesystem::path& path,
                      std::span<const Trial> trials) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  for (const Trial& t : trials) {
    os << (t.is_target ? 1 : 0) << ' ' << t.enroll_utt << ' ' << t.test_utt
       << '\n';
  }
}

void write_scores(const std::filesystem::path& path, const TrialScoreSet& s) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  char buf[64];
  for (size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f %d\n", s.scores[i],
                  s.is_target[i] ? 1 : 0);
    os << buf;
  }
}

}  // namespace mfcon
