// Copyright 2026 The lungscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lungscope/nn/optim.hpp"

#include <cmath>

namespace lungscope::nn {

Adam::Adam(std::vector<Parameter*> params, Options options) : params_(std::move(params)), options_(options) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::step(double grad_scale) {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k]->value.values();
    auto grad = params_[k]->grad.values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * grad_scale;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto* p : params_) p->grad.fill(0.0);
}

}  // namespace lungscope::nn
