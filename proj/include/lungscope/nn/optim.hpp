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

#pragma once

#include <vector>

#include "lungscope/nn/tensor.hpp"

namespace lungscope::nn {

/// Adaptive-moment optimiser over a fixed parameter list.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(std::vector<Parameter*> params, Options options);

  /// Applies one update from the accumulated gradients scaled by
  /// `grad_scale`, then zeroes them.
  void step(double grad_scale = 1.0);
  void zero_grad();
  long steps() const noexcept { return t_; }

 private:
  std::vector<Parameter*> params_;
  Options options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace lungscope::nn
