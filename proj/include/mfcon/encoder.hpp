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
#include <string>
#include <vector>

#include "mfcon/autograd.hpp"
#include "mfcon/params.hpp"

namespace mfcon {

enum class Mode { kTrain, kEval };

/// Conformer encoder hyperparameters. Defaults are the desk-scale preset.
struct EncoderConfig {
  int n_mels = 80;
  int num_blocks = 6;
  int model_dim = 64;
  int num_heads = 4;
  int ff_expansion = 4;
  int conv_kernel = 15;
  // Stride-2 frontend convolution kernel (padding kernel/2).
  int frontend_kernel = 3;
  double dropout = 0.0;

  void validate() const;

  // 6 blocks of width 256, 4 heads, kernel 15.
  static EncoderConfig full_scale();
};

/// Everything a forward pass needs besides the inputs: the tape to record
/// on, where parameters come from, and the train/eval switch.
///
/// `mutable_params` may be null for pure inference; parameters then enter
/// the tape as constants and batch-norm statistics are read only.
class ForwardContext {
 public:
  ForwardContext(ag::Tape& tape, ParameterStore& params, Mode mode,
                 uint64_t dropout_seed = 0);
  ForwardContext(ag::Tape& tape, const ParameterStore& params);

  ag::Tape& tape() { return tape_; }
  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::kTrain; }

  ag::Var param(const std::string& name);
  ag::BatchNormState batch_norm_state(const std::string& prefix,
                                      double momentum = 0.1);
  // Fresh seed for the next dropout site.
  uint64_t next_dropout_seed();

  const ParameterStore& params() const { return params_; }

 private:
  ag::Tape& tape_;
  ParameterStore* mutable_params_;
  const ParameterStore& params_;
  Mode mode_;
  uint64_t dropout_seed_;
  uint64_t dropout_calls_ = 0;
};

/// Per-block outputs, shallow to deep. Every map is (segments * seg_len) x
/// model_dim with a common seg_len.
struct TapSet {
  std::vector<ag::Var> maps;
  int seg_len = 0;
};

// Frames after the stride-2 frontend: floor((T - 1) / 2) + 1 for kernel 3.
int subsampled_length(int num_frames, const EncoderConfig& cfg);

void init_encoder_params(ParameterStore& params, const EncoderConfig& cfg,
                         uint64_t seed);

// Sinusoidal absolute position encoding, seg_len x dim.
Matrix sinusoidal_positions(int seg_len, int dim);

/// Stride-2 1-D convolution over time (im2col + GEMM), ReLU, plus sinusoidal
/// positions. x is (segments * seg_len) x n_mels; each segment needs at least
/// 4 frames.
ag::Var subsample_frontend(ForwardContext& ctx, const EncoderConfig& cfg,
                           ag::Var x, int seg_len);

/// Macaron Conformer block: x + FF/2, + MHSA, + conv module, + FF/2, then
/// layer norm. Shape preserving.
ag::Var conformer_block(ForwardContext& ctx, const EncoderConfig& cfg,
                        int block, ag::Var h, int seg_len);

/// Frontend followed by every block; tap k is the output of block k and the
/// input of block k+1.
TapSet encode_with_taps(ForwardContext& ctx, const EncoderConfig& cfg,
                        ag::Var x, int seg_len);

}  // namespace mfcon
