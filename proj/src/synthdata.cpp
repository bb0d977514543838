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

#include "mfcon/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "mfcon/errors.hpp"
#include "mfcon/random.hpp"
#include "mfcon/wav.hpp"

namespace mfcon {

void SynthSpec::validate() const {
  if (n_speakers < 2) throw ConfigError("synth.n_speakers must be >= 2");
  if (utts_per_speaker < 2) {
    throw ConfigError("synth.utts_per_speaker must be >= 2");
  }
  if (!(duration > 0)) throw ConfigError("synth.duration must be positive");
  if (sample_rate < 8000) throw ConfigError("synth.sample_rate too low");
  if (first_utterance < 0) throw ConfigError("synth.first_utterance < 0");
  if (!(channel_depth >= 0) || !(channel_tilt >= 0)) {
    throw ConfigError("synth channel strengths must be >= 0");
  }
}

SpeakerLatent speaker_latent(uint64_t seed, int speaker) {
  Rng rng(mix_seed(seed, 0x5BEA, static_cast<uint64_t>(speaker)));
  SpeakerLatent s;
  s.f0 = uniform(rng, 90.0, 250.0);
  s.formants[0] = uniform(rng, 300.0, 900.0);
  s.formants[1] = uniform(rng, 900.0, 2300.0);
  s.formants[2] = uniform(rng, 2300.0, 3500.0);
  for (double& bw : s.bandwidths) bw = uniform(rng, 60.0, 160.0);
  s.tilt = uniform(rng, 0.6, 1.4);
  return s;
}

std::string synth_speaker_id(int speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", speaker);
  return buf;
}

std::string synth_utterance_id(int speaker, int utterance) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%03d-utt%04d", speaker, utterance);
  return buf;
}

namespace {

Waveform synthesize(const SynthSpec& spec, int speaker, int utt) {
  const SpeakerLatent lat = speaker_latent(spec.seed, speaker);
  Rng rng(mix_seed(spec.seed, 0x077E,
                   static_cast<uint64_t>(speaker) * 1000003ULL + utt));
  const double sr = spec.sample_rate;
  const double f0 = lat.f0 * (1.0 + uniform(rng, -0.03, 0.03));
  double formants[3];
  for (int i = 0; i < 3; ++i) {
    formants[i] = lat.formants[i] * (1.0 + uniform(rng, -0.03, 0.03));
  }
  const double into_depth = uniform(rng, 0.02, 0.08);
  const double into_rate = uniform(rng, 0.5, 2.0);
  const double into_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double syl_rate = uniform(rng, 3.0, 6.0);
  const double syl_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double noise_level = uniform(rng, 0.005, 0.02);
  // Per-utterance channel: a smooth random log-gain over mel frequency plus a
  // tilt change. It does not depend on the speaker.
  double chan_amp[3], chan_phase[3];
  for (int j = 0; j < 3; ++j) {
    chan_amp[j] = uniform(rng, -spec.channel_depth, spec.channel_depth);
    chan_phase[j] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  const double tilt =
      lat.tilt + uniform(rng, -spec.channel_tilt, spec.channel_tilt);

  const double f_max = std::min(0.45 * sr, 4000.0);
  const int n_harm = std::max(1, static_cast<int>(f_max / (f0 * 1.1)));
  std::vector<std::complex<double>> coef(n_harm);
  for (int k = 1; k <= n_harm; ++k) {
    const double f = k * f0;
    double a = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double x = (f - formants[i]) / lat.bandwidths[i];
      a += 1.0 / (1.0 + x * x);
    }
    const double m = hz_to_mel(f) / hz_to_mel(f_max);
    double chan = 0.0;
    for (int j = 0; j < 3; ++j) {
      chan += chan_amp[j] *
              std::cos(2.0 * std::numbers::pi * (j + 1) * m + chan_phase[j]);
    }
    a = (a + 0.02) * std::pow(static_cast<double>(k), -tilt) * std::exp(chan);
    coef[k - 1] = std::polar(a, uniform(rng, 0.0, 2.0 * std::numbers::pi));
  }

  const auto n = static_cast<size_t>(std::lround(spec.duration * sr));
  Waveform w;
  w.sample_rate = spec.sample_rate;
  w.speaker_id = synth_speaker_id(speaker);
  w.utterance_id = synth_utterance_id(speaker, utt);
  w.samples.resize(n);
  double phase = 0.0;
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f_inst =
        f0 * (1.0 + into_depth *
                        std::sin(2.0 * std::numbers::pi * into_rate * t +
                                 into_phase));
    phase += 2.0 * std::numbers::pi * f_inst / sr;
    const std::complex<double> z = std::polar(1.0, phase);
    std::complex<double> zk = z;
    double v = 0.0;
    for (int k = 0; k < n_harm; ++k) {
      v += (coef[k] * zk).imag();
      zk *= z;
    }
    const double env =
        1.0 - 0.6 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * syl_rate *
                                               t +
                                           syl_phase));
    w.samples[i] = v * env;
    peak = std::max(peak, std::abs(w.samples[i]));
  }
  const double g = peak > 0 ? 0.5 / peak : 1.0;
  for (double& v : w.samples) v = v * g + noise_level * gaussian(rng);
  return w;
}

}  // namespace

std::vector<Waveform> generate_corpus(const SynthSpec& spec) {
  spec.validate();
  std::vector<Waveform> out;
  out.reserve(static_cast<size_t>(spec.n_speakers) * spec.utts_per_speaker);
  for (int s = 0; s < spec.n_speakers; ++s) {
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      out.push_back(synthesize(spec, s, spec.first_utterance + u));
    }
  }
  return out;
}

std::vector<Trial> generate_trials(std::span<const Waveform> corpus,
                                   int n_target, int n_nontarget,
                                   uint64_t seed) {
  if (n_target < 0 || n_nontarget < 0) {
    throw ConfigError("trial counts must be >= 0");
  }
  std::vector<std::pair<int, int>> targets, nontargets;
  const int n = static_cast<int>(corpus.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (corpus[i].utterance_id == corpus[j].utterance_id) continue;
      (corpus[i].speaker_id == corpus[j].speaker_id ? targets : nontargets)
          .emplace_back(i, j);
    }
  }
  if (static_cast<size_t>(n_target) > targets.size() ||
      static_cast<size_t>(n_nontarget) > nontargets.size()) {
    throw ConfigError("requested " + std::to_string(n_target) + " target / " +
                      std::to_string(n_nontarget) +
                      " nontarget trials but only " +
                      std::to_string(targets.size()) + " / " +
                      std::to_string(nontargets.size()) + " distinct pairs exist");
  }
  Rng rng(mix_seed(seed, 0x7A1A));
  // Partial Fisher-Yates: the first `k` entries become a uniform sample.
  auto draw = [&rng](std::vector<std::pair<int, int>>& pool, int k) {
    for (int i = 0; i < k; ++i) {
      const auto j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
  };
  draw(targets, n_target);
  draw(nontargets, n_nontarget);
  std::vector<Trial> trials;
  for (const auto& [i, j] : targets) {
    trials.push_back({corpus[i].utterance_id, corpus[j].utterance_id, true});
  }
  for (const auto& [i, j] : nontargets) {
    trials.push_back({corpus[i].utterance_id, corpus[j].utterance_id, false});
  }
  for (size_t i = trials.size(); i > 1; --i) {
    std::swap(trials[i - 1], trials[uniform_index(rng, i)]);
  }
  return trials;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string p;
    if (!(ls >> e.utterance_id)) continue;
    if (!(ls >> e.speaker_id >> p)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected '<utt_id> <speaker_id> <path>'");
    }
    if (!ids.insert(e.utterance_id).second) {
      throw DataError(path.string() + ": duplicate utterance id " +
                      e.utterance_id);
    }
    e.path = p;
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestEntry> entries) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& e : entries) {
    os << e.utterance_id << ' ' << e.speaker_id << ' ' << e.path.string()
       << '\n';
  }
}

std::vector<Waveform> load_manifest_audio(std::span<const ManifestEntry> m) {
  std::vector<Waveform> out;
  out.reserve(m.size());
  for (const auto& e : m) {
    Waveform w = read_wav(e.path);
    w.utterance_id = e.utterance_id;
    w.speaker_id = e.speaker_id;
    out.push_back(std::move(w));
  }
  return out;
}

void export_corpus(const std::filesystem::path& dir,
                   std::span<const Waveform> corpus,
                   std::span<const Trial> trials) {
  namespace fs = std::filesystem;
  std::vector<ManifestEntry> entries;
  for (const Waveform& w : corpus) {
    const fs::path rel = fs::path("wav") / w.speaker_id / (w.utterance_id + ".wav");
    fs::create_directories(dir / rel.parent_path());
    write_wav(dir / rel, w);
    entries.push_back({w.utterance_id, w.speaker_id, rel});
  }
  write_manifest(dir / "manifest.txt", entries);
  if (!trials.empty()) write_trial_list(dir / "trials.txt", trials);
}

}  // namespace mfcon
