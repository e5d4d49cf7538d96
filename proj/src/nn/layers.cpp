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

#include "lungscope/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lungscope/errors.hpp"

namespace lungscope::nn {

namespace {

Tensor he_normal(int n, int c, int h, int w, int fan_in, Rng& rng) {
  Tensor t(n, c, h, w);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, ConvGeometry geometry, Rng& rng, bool zero_init)
    : geometry_(geometry),
      weight_("conv.weight", zero_init ? Tensor(out_channels, in_channels, geometry.kernel_h, geometry.kernel_w)
                                       : he_normal(out_channels, in_channels, geometry.kernel_h, geometry.kernel_w,
                                                   in_channels * geometry.kernel_h * geometry.kernel_w, rng)),
      bias_("conv.bias", Tensor(out_channels, 1, 1, 1)) {}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng, bool zero_init)
    : Conv2d(in_channels, out_channels, ConvGeometry{kernel, kernel, stride, pad, pad}, rng, zero_init) {}

Tensor Conv2d::forward(const Tensor& input) {
  input_ = input;
  return kernels::conv2d_forward(input, weight_.value, bias_.value.values(), geometry_);
}

Tensor Conv2d::backward(const Tensor& grad_output) {
  kernels::conv2d_backward_params(input_, grad_output, geometry_, weight_.grad, bias_.grad.values());
  return kernels::conv2d_backward_input(grad_output, weight_.value, geometry_, input_.h(), input_.w());
}

void Conv2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string Conv2d::describe() const {
  return fmt::format("conv{}x{}({}->{}, s{}, p{}x{})", geometry_.kernel_h, geometry_.kernel_w, weight_.value.c(),
                     weight_.value.n(), geometry_.stride, geometry_.pad_h, geometry_.pad_w);
}

UpConv2x2::UpConv2x2(int in_channels, int out_channels, Rng& rng)
    : weight_("upconv.weight", he_normal(in_channels, out_channels, 2, 2, in_channels, rng)),
      bias_("upconv.bias", Tensor(out_channels, 1, 1, 1)) {}

Tensor UpConv2x2::forward(const Tensor& input) {
  input_ = input;
  return kernels::upconv2x2_forward(input, weight_.value, bias_.value.values());
}

Tensor UpConv2x2::backward(const Tensor& grad_output) {
  kernels::upconv2x2_backward_params(input_, grad_output, weight_.grad, bias_.grad.values());
  return kernels::upconv2x2_backward_input(grad_output, weight_.value);
}

void UpConv2x2::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string UpConv2x2::describe() const {
  return fmt::format("upconv2x2({}->{})", weight_.value.n(), weight_.value.c());
}

Linear::Linear(int in_features, int out_features, Rng& rng)
    : weight_("linear.weight", he_normal(out_features, in_features, 1, 1, in_features, rng)),
      bias_("linear.bias", Tensor(out_features, 1, 1, 1)) {}

Tensor Linear::forward(const Tensor& input) {
  input_ = input;
  return kernels::linear_forward(input, weight_.value, bias_.value.values());
}

Tensor Linear::backward(const Tensor& grad_output) {
  kernels::linear_backward_params(input_, grad_output, weight_.grad, bias_.grad.values());
  return kernels::linear_backward_input(grad_output, weight_.value, input_.shape());
}

void Linear::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string Linear::describe() const { return fmt::format("linear({}->{})", weight_.value.c(), weight_.value.n()); }

Tensor ReLU::forward(const Tensor& input) {
  output_ = input;
  for (auto& v : output_.values()) v = v > 0.0 ? v : 0.0;
  return output_;
}

Tensor ReLU::backward(const Tensor& grad_output) {
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output_[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

Tensor MaxPool::forward(const Tensor& input) {
  in_shape_ = input.shape();
  return kernels::maxpool_forward(input, geometry_, argmax_);
}

Tensor MaxPool::backward(const Tensor& grad_output) {
  return kernels::maxpool_backward(grad_output, argmax_, in_shape_);
}

std::string MaxPool::describe() const {
  return fmt::format("maxpool(k{}, s{}, p{})", geometry_.kernel, geometry_.stride, geometry_.pad);
}

Tensor AvgPool::forward(const Tensor& input) {
  in_shape_ = input.shape();
  return kernels::avgpool_forward(input, geometry_);
}

Tensor AvgPool::backward(const Tensor& grad_output) {
  return kernels::avgpool_backward(grad_output, geometry_, in_shape_);
}

std::string AvgPool::describe() const {
  return fmt::format("avgpool(k{}, s{}, p{})", geometry_.kernel, geometry_.stride, geometry_.pad);
}

Tensor GlobalAvgPool::forward(const Tensor& input) {
  in_shape_ = input.shape();
  Tensor out(input.n(), input.c(), 1, 1);
  const double inv = 1.0 / static_cast<double>(input.plane());
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      const double* x = input.channel(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < input.plane(); ++i) acc += x[i];
      out.at(n, c, 0, 0) = acc * inv;
    }
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_output) {
  Tensor grad(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  const double inv = 1.0 / static_cast<double>(grad.plane());
  for (int n = 0; n < grad.n(); ++n) {
    for (int c = 0; c < grad.c(); ++c) {
      const double v = grad_output.at(n, c, 0, 0) * inv;
      double* g = grad.channel(n, c);
      std::fill(g, g + grad.plane(), v);
    }
  }
  return grad;
}

Tensor Sequential::forward(const Tensor& input) { return forward_range(input, 0, layers_.size()); }

Tensor Sequential::backward(const Tensor& grad_output) { return backward_range(grad_output, 0, layers_.size()); }

Tensor Sequential::forward_range(const Tensor& input, std::size_t first, std::size_t last) {
  Tensor x = input;
  for (std::size_t i = first; i < last; ++i) x = layers_[i]->forward(x);
  return x;
}

Tensor Sequential::backward_range(const Tensor& grad_output, std::size_t first, std::size_t last) {
  Tensor g = grad_output;
  for (std::size_t i = last; i > first; --i) g = layers_[i - 1]->backward(g);
  return g;
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

std::string Sequential::describe() const {
  std::string s = "seq[";
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i) s += ", ";
    s += layers_[i]->describe();
  }
  return s + "]";
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw Error(ErrorKind::kInvalidInput, "cannot concatenate " + a.shape_string() + " and " + b.shape_string());
  }
  Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sample_size(), out.sample(n) + a.sample_size());
  }
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first_channels) {
  Tensor a(t.n(), first_channels, t.h(), t.w());
  Tensor b(t.n(), t.c() - first_channels, t.h(), t.w());
  for (int n = 0; n < t.n(); ++n) {
    std::copy(t.sample(n), t.sample(n) + a.sample_size(), a.sample(n));
    std::copy(t.sample(n) + a.sample_size(), t.sample(n) + t.sample_size(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

Tensor Branches::forward(const Tensor& input) {
  channels_.clear();
  Tensor out;
  for (auto& branch : branches_) {
    Tensor y = branch.forward(input);
    channels_.push_back(y.c());
    out = out.size() == 0 ? std::move(y) : concat_channels(out, y);
  }
  return out;
}

Tensor Branches::backward(const Tensor& grad_output) {
  Tensor grad_input;
  Tensor rest = grad_output;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    Tensor part;
    if (b + 1 < branches_.size()) {
      auto [head, tail] = split_channels(rest, channels_[b]);
      part = std::move(head);
      rest = std::move(tail);
    } else {
      part = std::move(rest);
    }
    Tensor g = branches_[b].backward(part);
    if (grad_input.size() == 0) {
      grad_input = std::move(g);
    } else {
      grad_input += g;
    }
  }
  return grad_input;
}

void Branches::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& branch : branches_) branch.collect_parameters(out);
}

std::string Branches::describe() const {
  std::string s = "branches{";
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    if (i) s += " | ";
    s += branches_[i].describe();
  }
  return s + "}";
}

Tensor Residual::forward(const Tensor& input) {
  Tensor y = main_.forward(input);
  y += shortcut_.empty() ? input : shortcut_.forward(input);
  return y;
}

Tensor Residual::backward(const Tensor& grad_output) {
  Tensor g = main_.backward(grad_output);
  g += shortcut_.empty() ? grad_output : shortcut_.backward(grad_output);
  return g;
}

void Residual::collect_parameters(std::vector<Parameter*>& out) {
  main_.collect_parameters(out);
  shortcut_.collect_parameters(out);
}

std::string Residual::describe() const {
  return "residual{" + main_.describe() + " + " + (shortcut_.empty() ? std::string("id") : shortcut_.describe()) + "}";
}

void zero_grad(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->grad.fill(0.0);
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t total = 0;
  for (auto* p : params) total += p->value.size();
  return total;
}

}  // namespace lungscope::nn
