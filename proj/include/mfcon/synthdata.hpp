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
#include <span>
#include <string>
#include <vector>

#include "mfcon/features.hpp"
#include "mfcon/metrics.hpp"

namespace mfcon {

/// Deterministic harmonic "speakers": each speaker owns a fundamental in
/// [90, 250] Hz and three resonances; utterances jitter those, add an
/// intonation contour, a syllable-rate envelope and low-level noise.
struct SynthSpec {
  int n_speakers = 10;
  int utts_per_speaker = 20;
  double duration = 3.0;
  int sample_rate = 16000;
  uint64_t seed = 0;
  // Index of the first utterance generated per speaker. A second corpus with
  // the same seed and a disjoint range holds new utterances of the same
  // speakers.
  int first_utterance = 0;
  // Per-utterance channel coloring: peak log-gain (nepers) of each of three
  // cosine components over the mel axis, and the half-range of a spectral
  // tilt change. Zero disables the channel.
  double channel_depth = 2.0;
  double channel_tilt = 0.5;

  void validate() const;
};

struct SpeakerLatent {
  double f0 = 0.0;
  double formants[3] = {0.0, 0.0, 0.0};
  double bandwidths[3] = {0.0, 0.0, 0.0};
  double tilt = 0.0;
};

SpeakerLatent speaker_latent(uint64_t seed, int speaker);

std::string synth_speaker_id(int speaker);
std::string synth_utterance_id(int speaker, int utterance);

std::vector<Waveform> generate_corpus(const SynthSpec& spec);

/// Target trials pair distinct utterances of one speaker, nontarget trials
/// utterances of different speakers; no unordered pair repeats.
std::vector<Trial> generate_trials(std::span<const Waveform> corpus,
                                   int n_target, int n_nontarget,
                                   uint64_t seed);

// ---- manifests -------------------------------------------------------------

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::filesystem::path path;
};

// `<utt_id> <speaker_id> <path>` per line; relative paths resolve against
// the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestEntry> entries);

// Loads every manifest entry; labels come from the manifest.
std::vector<Waveform> load_manifest_audio(std::span<const ManifestEntry> m);

/// Writes <dir>/wav/<spk>/<utt>.wav, <dir>/manifest.txt and, when trials are
/// given, <dir>/trials.txt.
void export_corpus(const std::filesystem::path& dir,
                   std::span<const Waveform> corpus,
                   std::span<const Trial> trials);

}  // namespace mfcon
