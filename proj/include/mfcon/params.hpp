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
#include <map>
#include <string>

#include "mfcon/autograd.hpp"
#include "mfcon/random.hpp"

namespace mfcon {

/// Named parameter arrays, iterated in name order. References stay valid
/// while the store lives (std::map nodes never move).
class ParameterStore {
 public:
  using Map = std::map<std::string, ag::Param>;

  ag::Param& add(const std::string& name, Matrix init, bool trainable = true);
  ag::Param& at(const std::string& name);
  const ag::Param& at(const std::string& name) const;
  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }

  void zero_grad();
  size_t size() const { return params_.size(); }
  size_t num_values() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(int rows, int cols, Rng& rng);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction; moments are keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  // Applies one update with learning rate lr to every trainable parameter
  // that has a gradient.
  void step(ParameterStore& params, double lr);

  int64_t steps() const { return steps_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamOptions opts_;
  int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace mfcon
