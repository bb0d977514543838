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

#include "mfcon/tensor.hpp"

namespace mfcon {

/// Mono audio with its labels. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::string speaker_id;
  std::string utterance_id;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// T x F log filterbank energies.
struct FeatureMatrix {
  Matrix values;
  double frame_shift = 0.01;
  std::string speaker_id;

  int num_frames() const { return static_cast<int>(values.rows()); }
  int num_bins() const { return static_cast<int>(values.cols()); }
};

struct FbankOptions {
  int n_mels = 80;
  double frame_len = 0.025;
  double frame_shift = 0.010;
  double low_freq = 20.0;
  // <= 0 means Nyquist.
  double high_freq = 0.0;
  double log_floor = 1e-10;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Hamming-windowed power spectrum -> triangular mel filters (HTK mel scale,
/// triangles in the mel domain) -> log(max(energy, log_floor)).
///
/// Frames are not padded: T = floor((N - frame_len*sr) / (frame_shift*sr)) + 1.
/// The FFT size is the next power of two above the frame length.
class FbankExtractor {
 public:
  FbankExtractor(int sample_rate, const FbankOptions& opts);

  FeatureMatrix operator()(const Waveform& w) const;

  int frame_length() const { return frame_length_; }
  int frame_shift() const { return frame_shift_; }
  int fft_size() const { return fft_size_; }
  int sample_rate() const { return sample_rate_; }
  const FbankOptions& options() const { return opts_; }
  // n_mels x (fft_size/2 + 1) weights.
  const Matrix& mel_weights() const { return mel_weights_; }
  // Center frequency of each mel band in Hz.
  const std::vector<double>& band_centers() const { return centers_; }

 private:
  FbankOptions opts_;
  int sample_rate_;
  int frame_length_;
  int frame_shift_;
  int fft_size_;
  std::vector<double> window_;
  Matrix mel_weights_;
  std::vector<double> centers_;
};

FeatureMatrix extract_fbank(const Waveform& w, int n_mels, double frame_len,
                            double frame_shift);

// Subtracts the per-bin mean over time (utterance-level CMN).
void mean_normalize(FeatureMatrix& f);

enum class FeatureNorm {
  kNone,
  // Per-bin mean over time.
  kCmn,
  // One scalar mean over the whole utterance; keeps the spectral envelope.
  kGlobal,
};

void normalize_features(FeatureMatrix& f, FeatureNorm norm);
std::string to_string(FeatureNorm v);
FeatureNorm parse_feature_norm(const std::string& s);

/// Fixed-length crop. Inputs shorter than the target are tiled from sample 0;
/// longer inputs start at a seeded uniform offset.
Waveform random_crop(const Waveform& w, double duration, uint64_t rng_seed);

// Offset random_crop would use; exposed so callers can log it.
size_t crop_offset(size_t input_len, size_t target_len, uint64_t rng_seed);

/// w + g * noise with g chosen so 10 log10(P_w / P_{g noise}) == snr_db.
/// Noise is tiled or truncated to the signal length.
Waveform add_noise(const Waveform& w, std::span<const double> noise,
                   double snr_db);
Waveform add_noise(const Waveform& w, const Waveform& noise, double snr_db);

// Gain add_noise applies; exposed for tests and logging.
double noise_gain(std::span<const double> signal, std::span<const double> noise,
                  double snr_db);

/// Full convolution truncated to len(w), rescaled to the input peak.
Waveform add_reverb(const Waveform& w, std::span<const double> ir);

// Plain linear convolution truncated to `out_len`; direct for short kernels,
// FFT based otherwise.
std::vector<double> convolve(std::span<const double> x,
                             std::span<const double> k, size_t out_len);

enum class AugmentKind { kNoise, kReverb };

struct AugmentSpec {
  AugmentKind kind = AugmentKind::kNoise;
  double snr_db = 10.0;
  std::vector<double> impulse_response;
  // Optional explicit noise; when empty, white Gaussian noise is drawn from
  // rng_seed.
  std::vector<double> noise;
  uint64_t rng_seed = 0;
};

void validate(const AugmentSpec& spec);

Waveform augment(const Waveform& w, const AugmentSpec& spec);

std::vector<double> white_noise(size_t n, uint64_t seed);

/// Exponentially decaying Gaussian tail with a unit direct path at tap 0.
std::vector<double> synthetic_impulse_response(int sample_rate, double rt60,
                                               double length, uint64_t seed);

struct AugmentOptions {
  double p_noise = 0.5;
  double snr_min = 0.0;
  double snr_max = 15.0;
  double rt60_min = 0.2;
  double rt60_max = 0.8;
  double ir_length = 0.3;
};

/// Draws AugmentSpecs. Sources default to synthetic generators; real corpora
/// can be loaded with load_noise_dir / load_ir_dir.
class Augmenter {
 public:
  explicit Augmenter(AugmentOptions opts = {}, int sample_rate = 16000)
      : opts_(opts), sample_rate_(sample_rate) {}

  void set_noise_bank(std::vector<Waveform> bank) {
    noise_bank_ = std::move(bank);
  }
  void set_ir_bank(std::vector<Waveform> bank) { ir_bank_ = std::move(bank); }

  void load_noise_dir(const std::filesystem::path& dir);
  void load_ir_dir(const std::filesystem::path& dir);

  AugmentSpec sample(size_t num_samples, uint64_t seed) const;

  const AugmentOptions& options() const { return opts_; }

 private:
  AugmentOptions opts_;
  int sample_rate_;
  std::vector<Waveform> noise_bank_;
  std::vector<Waveform> ir_bank_;
};

double mean_power(std::span<const double> x);

}  // namespace mfcon
