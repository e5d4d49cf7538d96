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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lungscope::nn {

/// Dense NCHW tensor of doubles. Fully connected activations use H = W = 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, double fill = 0.0);

  static Tensor like(const Tensor& other) { return Tensor(other.n(), other.c(), other.h(), other.w()); }

  int n() const noexcept { return shape_[0]; }
  int c() const noexcept { return shape_[1]; }
  int h() const noexcept { return shape_[2]; }
  int w() const noexcept { return shape_[3]; }
  const std::array<int, 4>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(shape_[2]) * shape_[3]; }
  std::size_t sample_size() const noexcept { return plane() * shape_[1]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  double* sample(int n) { return data_.data() + n * sample_size(); }
  const double* sample(int n) const { return data_.data() + n * sample_size(); }
  double* channel(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const double* channel(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

  void fill(double value);
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  std::string shape_string() const;

  Tensor& operator+=(const Tensor& other);

 private:
  std::size_t offset(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  std::array<int, 4> shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// Trainable parameter with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string param_name, Tensor init)
      : name(std::move(param_name)), value(std::move(init)), grad(Tensor::like(value)) {}
};

}  // namespace lungscope::nn
