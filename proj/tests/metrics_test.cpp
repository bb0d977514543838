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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mfcon/errors.hpp"
#include "mfcon/random.hpp"
#include "test_util.hpp"

namespace mfcon {
namespace {

using testing::brute_eer;
using testing::brute_mindcf;

TrialScoreSet make_set(const std::vector<double>& targets,
                       const std::vector<double>& nontargets) {
  TrialScoreSet s;
  for (double v : targets) {
    s.scores.push_back(v);
    s.is_target.push_back(true);
  }
  for (double v : nontargets) {
    s.scores.push_back(v);
    s.is_target.push_back(false);
  }
  return s;
}

TrialScoreSet random_set(Rng& rng, int n, bool ties) {
  TrialScoreSet s;
  for (int i = 0; i < n; ++i) {
    const bool target = i == 0 || (i != 1 && uniform(rng, 0.0, 1.0) < 0.5);
    double v = gaussian(rng) + (target ? 1.0 : 0.0);
    if (ties) v = std::round(v * 4.0) / 4.0;
    s.scores.push_back(v);
    s.is_target.push_back(target);
  }
  return s;
}

TEST(CosineScore, Basics) {
  Vector a(3), b(3);
  a << 1, 2, 3;
  b << -3, 0, 1;
  EXPECT_NEAR(cosine_score(a, a), 1.0, 1e-15);
  EXPECT_NEAR(cosine_score(a, b), 0.0, 1e-15);
  EXPECT_NEAR(cosine_score(a, -a), -1.0, 1e-15);
  EXPECT_NEAR(cosine_score(a, 5.0 * a), 1.0, 1e-15);
  EXPECT_THROW(cosine_score(a, Vector::Zero(3)), DegenerateInputError);
  EXPECT_THROW(cosine_score(a, Vector::Ones(2)), ShapeError);
}

TEST(Eer, PerfectSeparation) {
  const auto r = compute_eer(make_set({0.9, 0.8}, {0.2, 0.1}));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(compute_mindcf(make_set({0.9, 0.8}, {0.2, 0.1})).value, 0.0);
}

TEST(Eer, HandDerivedThird) {
  const auto r = compute_eer(make_set({0.8, 0.6, 0.4}, {0.5, 0.3, 0.1}));
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-15);
  EXPECT_GT(r.threshold, 0.4);
  EXPECT_LE(r.threshold, 0.5);
}

TEST(Eer, InterpolatesBetweenOperatingPoints) {
  // The rates cross strictly between two operating points.
  const TrialScoreSet s = make_set({0.9, 0.1}, {0.5, 0.6, 0.7});
  EXPECT_NEAR(compute_eer(s).value, brute_eer(s), 1e-12);
  EXPECT_GT(compute_eer(s).value, 0.0);
}

TEST(Eer, SingleClassIsAnError) {
  EXPECT_THROW(compute_eer(make_set({0.1, 0.2}, {})), DataError);
  EXPECT_THROW(compute_mindcf(make_set({}, {0.1})), DataError);
  TrialScoreSet bad = make_set({0.1}, {0.2});
  bad.scores[0] = std::nan("");
  EXPECT_THROW(compute_eer(bad), DataError);
  bad.scores.pop_back();
  EXPECT_THROW(compute_eer(bad), ShapeError);
}

TEST(Eer, MatchesBruteForceOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 199));
    const TrialScoreSet s = random_set(rng, n, trial % 3 == 0);
    EXPECT_NEAR(compute_eer(s).value, brute_eer(s), 1e-9) << "trial " << trial;
  }
}

TEST(Eer, LabelSwapGivesComplement) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    TrialScoreSet s = random_set(rng, 40, trial % 2 == 0);
    const double eer = compute_eer(s).value;
    for (size_t i = 0; i < s.size(); ++i) s.is_target[i] = !s.is_target[i];
    EXPECT_NEAR(compute_eer(s).value, 1.0 - eer, 1e-12);
  }
}

TEST(Eer, LabelSwapWithNegatedScoresIsUnchanged) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    TrialScoreSet s = random_set(rng, 40, false);
    const double eer = compute_eer(s).value;
    for (size_t i = 0; i < s.size(); ++i) {
      s.is_target[i] = !s.is_target[i];
      s.scores[i] = -s.scores[i];
    }
    EXPECT_NEAR(compute_eer(s).value, eer, 1e-12);
  }
}

TEST(Eer, InvariantUnderIncreasingTransforms) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const TrialScoreSet s = random_set(rng, 60, trial % 2 == 0);
    TrialScoreSet t = s;
    for (double& v : t.scores) v = std::exp(0.5 * v) * 3.0 - 7.0;
    EXPECT_NEAR(compute_eer(t).value, compute_eer(s).value, 1e-12);
    EXPECT_NEAR(compute_mindcf(t).value, compute_mindcf(s).value, 1e-12);
  }
}

TEST(Eer, DuplicateTrialMovesEerByAtMostOneStep) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    TrialScoreSet s = random_set(rng, 50, false);
    const double before = compute_eer(s).value;
    const size_t i = uniform_index(rng, s.size());
    s.scores.push_back(s.scores[i]);
    s.is_target.push_back(s.is_target[i]);
    double nt = 0, nn = 0;
    for (bool t : s.is_target) (t ? nt : nn) += 1;
    const double step = std::max(1.0 / (nt - (s.is_target[i] ? 1 : 0)),
                                 1.0 / (nn - (s.is_target[i] ? 0 : 1)));
    EXPECT_LE(std::abs(compute_eer(s).value - before), step + 1e-12);
  }
}

TEST(MinDcf, IdenticalScoresGiveOne) {
  const auto r = compute_mindcf(make_set({0.3, 0.3}, {0.3, 0.3, 0.3}), 0.01);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
}

TEST(MinDcf, MatchesBruteForceOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 199));
    const TrialScoreSet s = random_set(rng, n, trial % 3 == 0);
    const double p = trial % 2 ? 0.01 : 0.3;
    EXPECT_NEAR(compute_mindcf(s, p).value, brute_mindcf(s, p), 1e-12);
    EXPECT_LE(compute_mindcf(s, p).value, 1.0 + 1e-15);
  }
}

TEST(MinDcf, FiftyTrialInstance) {
  Rng rng(7);
  const TrialScoreSet s = random_set(rng, 50, false);
  EXPECT_NEAR(compute_mindcf(s).value, brute_mindcf(s, 0.01), 1e-12);
}

TEST(MinDcf, ParameterErrors) {
  const TrialScoreSet s = make_set({0.5}, {0.1});
  EXPECT_THROW(compute_mindcf(s, 0.0), ConfigError);
  EXPECT_THROW(compute_mindcf(s, 1.0), ConfigError);
  EXPECT_THROW(compute_mindcf(s, 0.01, 0.0), ConfigError);
}

TEST(ScoreTrials, OrderSelfAndEmpty) {
  std::unordered_map<std::string, Vector> store;
  Vector a(2), b(2), c(2);
  a << 1, 0;
  b << 0, 1;
  c << 1, 1;
  store["a"] = a;
  store["b"] = b;
  store["c"] = c;
  EXPECT_EQ(score_trials(std::vector<Trial>{}, store).size(), 0u);
  const std::vector<Trial> trials = {
      {"a", "a", true}, {"a", "b", false}, {"a", "c", true}};
  const TrialScoreSet s = score_trials(trials, store);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_NEAR(s.scores[0], 1.0, 1e-15);
  EXPECT_NEAR(s.scores[1], 0.0, 1e-15);
  EXPECT_NEAR(s.scores[2], std::sqrt(0.5), 1e-15);
  EXPECT_EQ(s.is_target, (std::vector<bool>{true, false, true}));
}

TEST(ScoreTrials, MissingIdsAreAllNamed) {
  std::unordered_map<std::string, Vector> store;
  store["a"] = Vector::Ones(2);
  const std::vector<Trial> trials = {
      {"a", "x", true}, {"y", "a", false}, {"x", "a", true}};
  try {
    score_trials(trials, store);
    FAIL() << "expected LookupError";
  } catch (const LookupError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("x"), std::string::npos);
    EXPECT_NE(msg.find("y"), std::string::npos);
  }
}

TEST(TrialFiles, RoundTripAndErrors) {
  testing::ScratchDir dir("trials");
  const std::vector<Trial> trials = {{"spk1/u1.wav", "spk1/u2.wav", true},
                                     {"spk1/u1.wav", "spk2/u1.wav", false}};
  write_trial_list(dir / "t.txt", trials);
  EXPECT_EQ(testing::read_text(dir / "t.txt"),
            "1 spk1/u1.wav spk1/u2.wav\n0 spk1/u1.wav spk2/u1.wav\n");
  const auto back = read_trial_list(dir / "t.txt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].test_utt, "spk2/u1.wav");
  EXPECT_FALSE(back[1].is_target);
  std::ofstream(dir / "bad.txt") << "1 a b\n2 a b\n";
  EXPECT_THROW(read_trial_list(dir / "bad.txt"), DataError);
  std::ofstream(dir / "short.txt") << "1 a\n";
  EXPECT_THROW(read_trial_list(dir / "short.txt"), DataError);
  EXPECT_THROW(read_trial_list(dir / "absent.txt"), DataError);
}

TEST(TrialFiles, ScoresUseSixDecimals) {
  testing::ScratchDir dir("scores");
  write_scores(dir / "s.txt", make_set({0.1234567}, {-0.5}));
  EXPECT_EQ(testing::read_text(dir / "s.txt"), "0.123457 1\n-0.500000 0\n");
}

}  // namespace
}  // namespace mfcon
