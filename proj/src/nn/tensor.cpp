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

#include "lungscope/nn/tensor.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "lungscope/errors.hpp"

namespace lungscope::nn {

Tensor::Tensor(int n, int c, int h, int w, double fill) : shape_{n, c, h, w} {
  if (n < 0 || c < 0 || h < 0 || w < 0) throw Error(ErrorKind::kInvalidArgument, "negative tensor dimension");
  data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor::shape_string() const {
  return fmt::format("[{}x{}x{}x{}]", shape_[0], shape_[1], shape_[2], shape_[3]);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw Error(ErrorKind::kInvalidArgument, "tensor shape mismatch " + shape_string() + " vs " + other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

}  // namespace lungscope::nn
