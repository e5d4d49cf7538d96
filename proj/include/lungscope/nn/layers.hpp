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

#include <deque>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lungscope/nn/kernels.hpp"
#include "lungscope/nn/tensor.hpp"

namespace lungscope::nn {

using Rng = std::mt19937_64;

/// A differentiable block. forward() caches whatever backward() needs, so a
/// layer instance serves one forward/backward pair at a time.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& input) = 0;
  /// Returns dL/dinput and accumulates parameter gradients.
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual void collect_parameters(std::vector<Parameter*>& out) { (void)out; }
  virtual std::string describe() const = 0;
};

using LayerPtr = std::unique_ptr<Layer>;

class Conv2d : public Layer {
 public:
  /// He-normal weights from `rng`; `zero_init` starts the weights at zero.
  Conv2d(int in_channels, int out_channels, ConvGeometry geometry, Rng& rng, bool zero_init = false);
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng, bool zero_init = false);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string describe() const override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  int out_channels() const { return weight_.value.n(); }

 private:
  ConvGeometry geometry_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

/// 2x2 stride-2 transposed convolution (decoder up-sampling).
class UpConv2x2 : public Layer {
 public:
  UpConv2x2(int in_channels, int out_channels, Rng& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string describe() const override;

 private:
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

class Linear : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string describe() const override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override { return "relu"; }

 private:
  Tensor output_;
};

class MaxPool : public Layer {
 public:
  explicit MaxPool(PoolGeometry geometry) : geometry_(geometry) {}
  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  PoolGeometry geometry_;
  std::array<int, 4> in_shape_{};
  std::vector<int> argmax_;
};

class AvgPool : public Layer {
 public:
  explicit AvgPool(PoolGeometry geometry) : geometry_(geometry) {}
  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  PoolGeometry geometry_;
  std::array<int, 4> in_shape_{};
};

/// (n, c, h, w) -> (n, c, 1, 1) spatial mean.
class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override { return "global-avg-pool"; }

 private:
  std::array<int, 4> in_shape_{};
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename T, typename... Args>
  T& add(Args&&... args) {
    auto layer = std::make_unique<T>(std::forward<Args>(args)...);
    T& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void append(LayerPtr layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string describe() const override;

  /// Runs layers [first, last).
  Tensor forward_range(const Tensor& input, std::size_t first, std::size_t last);
  Tensor backward_range(const Tensor& grad_output, std::size_t first, std::size_t last);

  std::size_t size() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }
  Layer& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<LayerPtr> layers_;
};

/// Parallel branches over the same input, concatenated along channels
/// (fire modules, inception blocks).
class Branches : public Layer {
 public:
  Sequential& branch() { return branches_.emplace_back(); }

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string describe() const override;

 private:
  std::deque<Sequential> branches_;
  std::vector<int> channels_;
};

/// y = main(x) + shortcut(x); an empty shortcut is the identity.
class Residual : public Layer {
 public:
  Sequential& main() { return main_; }
  Sequential& shortcut() { return shortcut_; }

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string describe() const override;

 private:
  Sequential main_;
  Sequential shortcut_;
};

/// Channel-wise concatenation of two tensors with equal n, h, w.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits channels [0, first_channels) and the rest.
std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first_channels);

void zero_grad(const std::vector<Parameter*>& params);
std::size_t parameter_count(const std::vector<Parameter*>& params);

}  // namespace lungscope::nn
