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

#include "mfcon/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "mfcon/errors.hpp"
#include "mfcon/random.hpp"
#include "mfcon/wav.hpp"

namespace mfcon {

double gaussian(Rng& rng) {
  // Box-Muller on our own uniforms keeps streams identical across stdlibs.
  double u1 = uniform(rng);
  while (u1 <= 0.0) u1 = uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

FbankExtractor::FbankExtractor(int sample_rate, const FbankOptions& opts)
    : opts_(opts), sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (opts.n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (opts.frame_len <= 0 || opts.frame_shift <= 0) {
    throw ConfigError("frame_len and frame_shift must be positive");
  }
  frame_length_ = static_cast<int>(std::lround(opts.frame_len * sample_rate));
  frame_shift_ = static_cast<int>(std::lround(opts.frame_shift * sample_rate));
  if (frame_length_ < 2 || frame_shift_ < 1) {
    throw ConfigError("frame too short for sample rate");
  }
  fft_size_ = 1;
  while (fft_size_ < frame_length_) fft_size_ <<= 1;

  window_.resize(frame_length_);
  for (int i = 0; i < frame_length_; ++i) {
    window_[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i /
                                        (frame_length_ - 1));
  }

  const double nyquist = 0.5 * sample_rate;
  const double high = opts.high_freq > 0 ? opts.high_freq : nyquist;
  if (!(opts.low_freq >= 0 && opts.low_freq < high && high <= nyquist)) {
    throw ConfigError("invalid mel frequency range");
  }
  const double mel_lo = hz_to_mel(opts.low_freq);
  const double mel_hi = hz_to_mel(high);
  const double delta = (mel_hi - mel_lo) / (opts.n_mels + 1);
  const int n_bins = fft_size_ / 2 + 1;
  mel_weights_ = Matrix::Zero(opts.n_mels, n_bins);
  centers_.resize(opts.n_mels);
  for (int m = 0; m < opts.n_mels; ++m) {
    const double left = mel_lo + m * delta;
    const double center = left + delta;
    const double right = center + delta;
    centers_[m] = mel_to_hz(center);
    for (int k = 0; k < n_bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate /
                                   fft_size_);
      if (mel > left && mel < right) {
        mel_weights_(m, k) = mel <= center ? (mel - left) / delta
                                           : (right - mel) / delta;
      }
    }
  }
}

FeatureMatrix FbankExtractor::operator()(const Waveform& w) const {
  if (w.sample_rate != sample_rate_) {
    throw ConfigError("waveform sample rate " + std::to_string(w.sample_rate) +
                      " does not match extractor rate " +
                      std::to_string(sample_rate_));
  }
  const auto n = static_cast<int64_t>(w.samples.size());
  if (n < frame_length_) {
    throw LengthError("waveform of " + std::to_string(n) +
                      " samples is shorter than one frame (" +
                      std::to_string(frame_length_) + ")");
  }
  const int64_t frames = (n - frame_length_) / frame_shift_ + 1;
  const int n_bins = fft_size_ / 2 + 1;

  Eigen::FFT<double> fft;
  std::vector<double> buf(fft_size_, 0.0);
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd power(n_bins);

  FeatureMatrix out;
  out.values.resize(frames, opts_.n_mels);
  out.frame_shift = static_cast<double>(frame_shift_) / sample_rate_;
  out.speaker_id = w.speaker_id;
  const double floor = std::log(opts_.log_floor);
  for (int64_t t = 0; t < frames; ++t) {
    const double* src = w.samples.data() + t * frame_shift_;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int i = 0; i < frame_length_; ++i) buf[i] = src[i] * window_[i];
    fft.fwd(spec, buf);
    for (int k = 0; k < n_bins; ++k) power[k] = std::norm(spec[k]);
    Eigen::VectorXd energy = mel_weights_ * power;
    for (int m = 0; m < opts_.n_mels; ++m) {
      out.values(t, m) = energy[m] > opts_.log_floor ? std::log(energy[m])
                                                     : floor;
    }
  }
  return out;
}

FeatureMatrix extract_fbank(const Waveform& w, int n_mels, double frame_len,
                            double frame_shift) {
  FbankOptions opts;
  opts.n_mels = n_mels;
  opts.frame_len = frame_len;
  opts.frame_shift = frame_shift;
  return FbankExtractor(w.sample_rate, opts)(w);
}

void mean_normalize(FeatureMatrix& f) {
  if (f.values.rows() == 0) return;
  const RowVector mean = f.values.colwise().mean();
  f.values.rowwise() -= mean;
}

void normalize_features(FeatureMatrix& f, FeatureNorm norm) {
  switch (norm) {
    case FeatureNorm::kNone:
      return;
    case FeatureNorm::kCmn:
      mean_normalize(f);
      return;
    case FeatureNorm::kGlobal:
      if (f.values.size() > 0) f.values.array() -= f.values.mean();
      return;
  }
}

std::string to_string(FeatureNorm v) {
  switch (v) {
    case FeatureNorm::kNone: return "none";
    case FeatureNorm::kCmn: return "cmn";
    case FeatureNorm::kGlobal: return "global";
  }
  return "?";
}

FeatureNorm parse_feature_norm(const std::string& s) {
  if (s == "none") return FeatureNorm::kNone;
  if (s == "cmn") return FeatureNorm::kCmn;
  if (s == "global") return FeatureNorm::kGlobal;
  throw ConfigError("unknown feature normalization: " + s);
}

size_t crop_offset(size_t input_len, size_t target_len, uint64_t rng_seed) {
  if (input_len <= target_len) return 0;
  Rng rng(rng_seed);
  return uniform_index(rng, input_len - target_len + 1);
}

Waveform random_crop(const Waveform& w, double duration, uint64_t rng_seed) {
  if (!(duration > 0)) throw ConfigError("crop duration must be positive");
  if (w.samples.empty()) throw LengthError("cannot crop an empty waveform");
  const auto target =
      static_cast<size_t>(std::lround(duration * w.sample_rate));
  Waveform out = w;
  out.samples.resize(target);
  const size_t n = w.samples.size();
  const size_t offset = crop_offset(n, target, rng_seed);
  for (size_t i = 0; i < target; ++i) {
    out.samples[i] = w.samples[(offset + i) % n];
  }
  return out;
}

double noise_gain(std::span<const double> signal, std::span<const double> noise,
                  double snr_db) {
  if (noise.empty()) throw DegenerateInputError("noise is empty");
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
  const double ps = mean_power(signal);
  if (ps <= 0.0) {
    throw DegenerateInputError("signal is silent; SNR is undefined");
  }
  // Power of the noise as it will be laid against the signal (tiled/cut).
  double acc = 0.0;
  for (size_t i = 0; i < signal.size(); ++i) {
    const double v = noise[i % noise.size()];
    acc += v * v;
  }
  const double pn = acc / static_cast<double>(signal.size());
  if (pn <= 0.0) throw DegenerateInputError("noise is silent");
  return std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
}

Waveform add_noise(const Waveform& w, std::span<const double> noise,
                   double snr_db) {
  const double g = noise_gain(w.samples, noise, snr_db);
  Waveform out = w;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] += g * noise[i % noise.size()];
  }
  return out;
}

Waveform add_noise(const Waveform& w, const Waveform& noise, double snr_db) {
  return add_noise(w, std::span<const double>(noise.samples), snr_db);
}

std::vector<double> convolve(std::span<const double> x,
                             std::span<const double> k, size_t out_len) {
  std::vector<double> y(out_len, 0.0);
  if (x.empty() || k.empty()) return y;
  if (k.size() <= 64 || x.size() * k.size() < (1u << 20)) {
    for (size_t n = 0; n < out_len; ++n) {
      const size_t jmax = std::min(k.size() - 1, n);
      double acc = 0.0;
      for (size_t j = 0; j <= jmax; ++j) {
        if (n - j < x.size()) acc += k[j] * x[n - j];
      }
      y[n] = acc;
    }
    return y;
  }
  size_t n_fft = 1;
  while (n_fft < x.size() + k.size() - 1) n_fft <<= 1;
  Eigen::FFT<double> fft;
  std::vector<double> xa(n_fft, 0.0), ka(n_fft, 0.0);
  std::copy(x.begin(), x.end(), xa.begin());
  std::copy(k.begin(), k.end(), ka.begin());
  std::vector<std::complex<double>> xf, kf;
  fft.fwd(xf, xa);
  fft.fwd(kf, ka);
  for (size_t i = 0; i < xf.size(); ++i) xf[i] *= kf[i];
  std::vector<double> full;
  fft.inv(full, xf);
  for (size_t n = 0; n < out_len && n < full.size(); ++n) y[n] = full[n];
  return y;
}

Waveform add_reverb(const Waveform& w, std::span<const double> ir) {
  if (ir.empty()) throw DegenerateInputError("impulse response is empty");
  if (std::all_of(ir.begin(), ir.end(), [](double v) { return v == 0.0; })) {
    throw DegenerateInputError("impulse response is all zeros");
  }
  Waveform out = w;
  out.samples = convolve(w.samples, ir, w.samples.size());
  double peak_in = 0.0, peak_out = 0.0;
  for (double v : w.samples) peak_in = std::max(peak_in, std::abs(v));
  for (double v : out.samples) peak_out = std::max(peak_out, std::abs(v));
  if (peak_out > 0.0 && peak_in != peak_out) {
    const double g = peak_in / peak_out;
    for (double& v : out.samples) v *= g;
  }
  return out;
}

void validate(const AugmentSpec& spec) {
  switch (spec.kind) {
    case AugmentKind::kNoise:
      if (!std::isfinite(spec.snr_db)) {
        throw ConfigError("noise augmentation needs a finite snr_db");
      }
      if (!spec.impulse_response.empty()) {
        throw ConfigError("noise augmentation must not carry an impulse "
                          "response");
      }
      break;
    case AugmentKind::kReverb:
      if (spec.impulse_response.empty()) {
        throw ConfigError("reverb augmentation needs an impulse response");
      }
      if (!spec.noise.empty()) {
        throw ConfigError("reverb augmentation must not carry noise");
      }
      break;
  }
}

Waveform augment(const Waveform& w, const AugmentSpec& spec) {
  validate(spec);
  if (spec.kind == AugmentKind::kReverb) {
    return add_reverb(w, spec.impulse_response);
  }
  if (!spec.noise.empty()) return add_noise(w, spec.noise, spec.snr_db);
  const auto noise = white_noise(w.samples.size(), spec.rng_seed);
  return add_noise(w, noise, spec.snr_db);
}

std::vector<double> white_noise(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = gaussian(rng);
  return out;
}

std::vector<double> synthetic_impulse_response(int sample_rate, double rt60,
                                               double length, uint64_t seed) {
  if (!(rt60 > 0) || !(length > 0)) {
    throw ConfigError("rt60 and length must be positive");
  }
  const auto n = std::max<size_t>(
      1, static_cast<size_t>(std::lround(length * sample_rate)));
  Rng rng(seed);
  std::vector<double> ir(n);
  // 60 dB amplitude decay over rt60 seconds.
  const double decay = 3.0 * std::log(10.0) / (rt60 * sample_rate);
  ir[0] = 1.0;
  for (size_t i = 1; i < n; ++i) {
    ir[i] = 0.3 * gaussian(rng) * std::exp(-decay * static_cast<double>(i));
  }
  return ir;
}

namespace {

std::vector<Waveform> load_dir(const std::filesystem::path& dir,
                               int sample_rate) {
  std::vector<Waveform> out;
  for (const auto& p : list_wav_files(dir)) {
    Waveform w = read_wav(p);
    if (w.sample_rate != sample_rate) {
      throw DataError(p.string() + ": expected " +
                      std::to_string(sample_rate) + " Hz, got " +
                      std::to_string(w.sample_rate));
    }
    out.push_back(std::move(w));
  }
  if (out.empty()) throw DataError("no wav files under " + dir.string());
  return out;
}

}  // namespace

void Augmenter::load_noise_dir(const std::filesystem::path& dir) {
  noise_bank_ = load_dir(dir, sample_rate_);
}

void Augmenter::load_ir_dir(const std::filesystem::path& dir) {
  ir_bank_ = load_dir(dir, sample_rate_);
}

AugmentSpec Augmenter::sample(size_t num_samples, uint64_t seed) const {
  Rng rng(seed);
  AugmentSpec spec;
  spec.rng_seed = mix_seed(seed, 1);
  if (uniform(rng) < opts_.p_noise) {
    spec.kind = AugmentKind::kNoise;
    spec.snr_db = uniform(rng, opts_.snr_min, opts_.snr_max);
    if (!noise_bank_.empty()) {
      const auto& src = noise_bank_[uniform_index(rng, noise_bank_.size())];
      spec.noise = random_crop(src, static_cast<double>(num_samples) /
                                        src.sample_rate,
                               mix_seed(seed, 2))
                       .samples;
    }
  } else {
    spec.kind = AugmentKind::kReverb;
    if (!ir_bank_.empty()) {
      spec.impulse_response =
          ir_bank_[uniform_index(rng, ir_bank_.size())].samples;
    } else {
      const double rt60 = uniform(rng, opts_.rt60_min, opts_.rt60_max);
      spec.impulse_response = synthetic_impulse_response(
          sample_rate_, rt60, opts_.ir_length, mix_seed(seed, 3));
    }
  }
  return spec;
}

}  // namespace mfcon
