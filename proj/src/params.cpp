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

#include "mfcon/params.hpp"

#include <cmath>

#include "mfcon/errors.hpp"

namespace mfcon {

ag::Param& ParameterStore::add(const std::string& name, Matrix init,
                               bool trainable) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw ConfigError("duplicate parameter name: " + name);
  it->second.value = std::move(init);
  it->second.trainable = trainable;
  it->second.zero_grad();
  return it->second;
}

ag::Param& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw LookupError("unknown parameter: " + name);
  return it->second;
}

const ag::Param& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw LookupError("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

size_t ParameterStore::num_values() const {
  size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

Matrix xavier_uniform(int rows, int cols, Rng& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = uniform(rng, -a, a);
  }
  return m;
}

void Adam::step(ParameterStore& params, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
  for (auto& [name, p] : params) {
    if (!p.trainable || p.grad.size() == 0) continue;
    auto& mom = moments_[name];
    if (mom.m.size() == 0) {
      mom.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mom.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    mom.m = opts_.beta1 * mom.m + (1.0 - opts_.beta1) * p.grad;
    mom.v = opts_.beta2 * mom.v +
            (1.0 - opts_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (mom.m.array() / c1) /
                       ((mom.v.array() / c2).sqrt() + opts_.eps);
  }
}

}  // namespace mfcon
