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

#include <span>
#include <vector>

#include "lungscope/nn/tensor.hpp"

// Compute kernels behind the layers. Everything here is OpenMP-parallel over
// independent outputs with a fixed per-output accumulation order, so results
// are bit-identical for any thread count. `lungscope::nn::reference` holds
// the serial direct-loop versions used as test oracles and benchmark
// baselines.

namespace lungscope::nn {

struct ConvGeometry {
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int pad_h = 1;
  int pad_w = 1;

  int out_h(int in_h) const { return (in_h + 2 * pad_h - kernel_h) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad_w - kernel_w) / stride + 1; }
};

struct PoolGeometry {
  int kernel = 2;
  int stride = 2;
  int pad = 0;

  int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

namespace kernels {

/// C[M x N] (+)= A[M x K] * B[K x N], all row-major and densely packed.
void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

void transpose(int rows, int cols, const double* src, double* dst);

void im2col(const double* image, int channels, int height, int width, const ConvGeometry& g, double* col);
void col2im(const double* col, int channels, int height, int width, const ConvGeometry& g, double* image);

/// weight: (out_channels, in_channels, kernel_h, kernel_w); bias: out_channels.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                      const ConvGeometry& g);
Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& weight, const ConvGeometry& g,
                             int in_h, int in_w);
/// Accumulates into grad_weight / grad_bias.
void conv2d_backward_params(const Tensor& input, const Tensor& grad_output, const ConvGeometry& g,
                            Tensor& grad_weight, std::span<double> grad_bias);

/// 2x2 stride-2 transposed convolution. weight: (in_channels, out_channels, 2, 2).
Tensor upconv2x2_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias);
Tensor upconv2x2_backward_input(const Tensor& grad_output, const Tensor& weight);
void upconv2x2_backward_params(const Tensor& input, const Tensor& grad_output, Tensor& grad_weight,
                               std::span<double> grad_bias);

/// weight: (out_features, in_features, 1, 1); input treated as (n, in_features).
Tensor linear_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias);
Tensor linear_backward_input(const Tensor& grad_output, const Tensor& weight, const std::array<int, 4>& in_shape);
void linear_backward_params(const Tensor& input, const Tensor& grad_output, Tensor& grad_weight,
                            std::span<double> grad_bias);

/// argmax receives, per output element, the flat index of the winning input
/// element within its (n, c) plane.
Tensor maxpool_forward(const Tensor& input, const PoolGeometry& g, std::vector<int>& argmax);
Tensor maxpool_backward(const Tensor& grad_output, const std::vector<int>& argmax, const std::array<int, 4>& in_shape);

/// Average pooling with zero padding counted in the divisor.
Tensor avgpool_forward(const Tensor& input, const PoolGeometry& g);
Tensor avgpool_backward(const Tensor& grad_output, const PoolGeometry& g, const std::array<int, 4>& in_shape);

}  // namespace kernels

namespace reference {

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                      const ConvGeometry& g);
Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& weight, const ConvGeometry& g,
                             int in_h, int in_w);
void conv2d_backward_params(const Tensor& input, const Tensor& grad_output, const ConvGeometry& g,
                            Tensor& grad_weight, std::span<double> grad_bias);

Tensor upconv2x2_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias);
Tensor upconv2x2_backward_input(const Tensor& grad_output, const Tensor& weight);
void upconv2x2_backward_params(const Tensor& input, const Tensor& grad_output, Tensor& grad_weight,
                               std::span<double> grad_bias);

Tensor linear_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias);

Tensor maxpool_forward(const Tensor& input, const PoolGeometry& g);
Tensor avgpool_forward(const Tensor& input, const PoolGeometry& g);

}  // namespace reference

}  // namespace lungscope::nn
