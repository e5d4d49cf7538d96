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

// Serial direct-loop kernels. Deliberately naive: these are the oracles the
// parallel kernels are tested against.

#include <limits>

#include "lungscope/nn/kernels.hpp"

namespace lungscope::nn::reference {

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                      const ConvGeometry& g) {
  const int oh = g.out_h(input.h()), ow = g.out_w(input.w());
  Tensor out(input.n(), weight.n(), oh, ow);
  for (int n = 0; n < input.n(); ++n)
    for (int o = 0; o < weight.n(); ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (int i = 0; i < input.c(); ++i)
            for (int ky = 0; ky < g.kernel_h; ++ky)
              for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int iy = oy * g.stride - g.pad_h + ky, ix = ox * g.stride - g.pad_w + kx;
                if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
                acc += weight.at(o, i, ky, kx) * input.at(n, i, iy, ix);
              }
          out.at(n, o, oy, ox) = acc;
        }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& weight, const ConvGeometry& g,
                             int in_h, int in_w) {
  Tensor grad_input(grad_output.n(), weight.c(), in_h, in_w);
  for (int n = 0; n < grad_output.n(); ++n)
    for (int o = 0; o < weight.n(); ++o)
      for (int oy = 0; oy < grad_output.h(); ++oy)
        for (int ox = 0; ox < grad_output.w(); ++ox) {
          const double gy = grad_output.at(n, o, oy, ox);
          for (int i = 0; i < weight.c(); ++i)
            for (int ky = 0; ky < g.kernel_h; ++ky)
              for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int iy = oy * g.stride - g.pad_h + ky, ix = ox * g.stride - g.pad_w + kx;
                if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                grad_input.at(n, i, iy, ix) += weight.at(o, i, ky, kx) * gy;
              }
        }
  return grad_input;
}

void conv2d_backward_params(const Tensor& input, const Tensor& grad_output, const ConvGeometry& g,
                            Tensor& grad_weight, std::span<double> grad_bias) {
  for (int n = 0; n < input.n(); ++n)
    for (int o = 0; o < grad_weight.n(); ++o)
      for (int oy = 0; oy < grad_output.h(); ++oy)
        for (int ox = 0; ox < grad_output.w(); ++ox) {
          const double gy = grad_output.at(n, o, oy, ox);
          if (!grad_bias.empty()) grad_bias[o] += gy;
          for (int i = 0; i < input.c(); ++i)
            for (int ky = 0; ky < g.kernel_h; ++ky)
              for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int iy = oy * g.stride - g.pad_h + ky, ix = ox * g.stride - g.pad_w + kx;
                if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
                grad_weight.at(o, i, ky, kx) += gy * input.at(n, i, iy, ix);
              }
        }
}

Tensor upconv2x2_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias) {
  Tensor out(input.n(), weight.c(), 2 * input.h(), 2 * input.w());
  for (int n = 0; n < out.n(); ++n)
    for (int o = 0; o < out.c(); ++o)
      for (int y = 0; y < out.h(); ++y)
        for (int x = 0; x < out.w(); ++x) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (int i = 0; i < input.c(); ++i) acc += weight.at(i, o, y % 2, x % 2) * input.at(n, i, y / 2, x / 2);
          out.at(n, o, y, x) = acc;
        }
  return out;
}

Tensor upconv2x2_backward_input(const Tensor& grad_output, const Tensor& weight) {
  Tensor grad_input(grad_output.n(), weight.n(), grad_output.h() / 2, grad_output.w() / 2);
  for (int n = 0; n < grad_output.n(); ++n)
    for (int o = 0; o < grad_output.c(); ++o)
      for (int y = 0; y < grad_output.h(); ++y)
        for (int x = 0; x < grad_output.w(); ++x)
          for (int i = 0; i < weight.n(); ++i)
            grad_input.at(n, i, y / 2, x / 2) += weight.at(i, o, y % 2, x % 2) * grad_output.at(n, o, y, x);
  return grad_input;
}

void upconv2x2_backward_params(const Tensor& input, const Tensor& grad_output, Tensor& grad_weight,
                               std::span<double> grad_bias) {
  for (int n = 0; n < grad_output.n(); ++n)
    for (int o = 0; o < grad_output.c(); ++o)
      for (int y = 0; y < grad_output.h(); ++y)
        for (int x = 0; x < grad_output.w(); ++x) {
          const double gy = grad_output.at(n, o, y, x);
          if (!grad_bias.empty()) grad_bias[o] += gy;
          for (int i = 0; i < input.c(); ++i) grad_weight.at(i, o, y % 2, x % 2) += gy * input.at(n, i, y / 2, x / 2);
        }
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias) {
  Tensor out(input.n(), weight.n(), 1, 1);
  const std::size_t features = input.sample_size();
  for (int n = 0; n < input.n(); ++n)
    for (int o = 0; o < weight.n(); ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < features; ++i) acc += weight[o * features + i] * input.sample(n)[i];
      out.at(n, o, 0, 0) = acc;
    }
  return out;
}

Tensor maxpool_forward(const Tensor& input, const PoolGeometry& g) {
  Tensor out(input.n(), input.c(), g.out_size(input.h()), g.out_size(input.w()));
  for (int n = 0; n < out.n(); ++n)
    for (int c = 0; c < out.c(); ++c)
      for (int oy = 0; oy < out.h(); ++oy)
        for (int ox = 0; ox < out.w(); ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int iy = oy * g.stride - g.pad + ky, ix = ox * g.stride - g.pad + kx;
              if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
              if (input.at(n, c, iy, ix) > best) best = input.at(n, c, iy, ix);
            }
          out.at(n, c, oy, ox) = best;
        }
  return out;
}

Tensor avgpool_forward(const Tensor& input, const PoolGeometry& g) {
  Tensor out(input.n(), input.c(), g.out_size(input.h()), g.out_size(input.w()));
  for (int n = 0; n < out.n(); ++n)
    for (int c = 0; c < out.c(); ++c)
      for (int oy = 0; oy < out.h(); ++oy)
        for (int ox = 0; ox < out.w(); ++ox) {
          double acc = 0.0;
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int iy = oy * g.stride - g.pad + ky, ix = ox * g.stride - g.pad + kx;
              if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
              acc += input.at(n, c, iy, ix);
            }
          out.at(n, c, oy, ox) = acc / (g.kernel * g.kernel);
        }
  return out;
}

}  // namespace lungscope::nn::reference
