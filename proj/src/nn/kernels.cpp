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

#include "lungscope/nn/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "lungscope/errors.hpp"

namespace lungscope::nn::kernels {

namespace {

constexpr int kColumnTile = 512;
constexpr int kRowBlock = 4;

void check_conv_shapes(const Tensor& input, const Tensor& weight, const ConvGeometry& g) {
  if (weight.c() != input.c() || weight.h() != g.kernel_h || weight.w() != g.kernel_w) {
    throw Error(ErrorKind::kInvalidInput,
                "conv weight " + weight.shape_string() + " does not match input " + input.shape_string());
  }
  if (g.out_h(input.h()) < 1 || g.out_w(input.w()) < 1) {
    throw Error(ErrorKind::kInvalidInput, "conv input " + input.shape_string() + " smaller than kernel");
  }
}

}  // namespace

void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
  const int row_blocks = (m + kRowBlock - 1) / kRowBlock;
  // Each C element sums over k in ascending order no matter how rows are
  // distributed across threads.
#pragma omp parallel for schedule(static)
  for (int rb = 0; rb < row_blocks; ++rb) {
    const int i0 = rb * kRowBlock;
    const int rows = std::min(kRowBlock, m - i0);
    for (int j0 = 0; j0 < n; j0 += kColumnTile) {
      const int cols = std::min(kColumnTile, n - j0);
      if (rows == kRowBlock) {
        double* __restrict__ c0 = c + static_cast<std::size_t>(i0) * n + j0;
        double* __restrict__ c1 = c0 + n;
        double* __restrict__ c2 = c1 + n;
        double* __restrict__ c3 = c2 + n;
        const double* a0 = a + static_cast<std::size_t>(i0) * k;
        for (int kk = 0; kk < k; ++kk) {
          const double va0 = a0[kk];
          const double va1 = a0[k + kk];
          const double va2 = a0[2 * k + kk];
          const double va3 = a0[3 * k + kk];
          const double* __restrict__ brow = b + static_cast<std::size_t>(kk) * n + j0;
          for (int j = 0; j < cols; ++j) {
            const double bv = brow[j];
            c0[j] += va0 * bv;
            c1[j] += va1 * bv;
            c2[j] += va2 * bv;
            c3[j] += va3 * bv;
          }
        }
      } else {
        for (int r = 0; r < rows; ++r) {
          double* __restrict__ crow = c + static_cast<std::size_t>(i0 + r) * n + j0;
          const double* arow = a + static_cast<std::size_t>(i0 + r) * k;
          for (int kk = 0; kk < k; ++kk) {
            const double va = arow[kk];
            const double* __restrict__ brow = b + static_cast<std::size_t>(kk) * n + j0;
            for (int j = 0; j < cols; ++j) crow[j] += va * brow[j];
          }
        }
      }
    }
  }
}

void transpose(int rows, int cols, const double* src, double* dst) {
  constexpr int kTile = 32;
#pragma omp parallel for schedule(static)
  for (int i0 = 0; i0 < rows; i0 += kTile) {
    for (int j0 = 0; j0 < cols; j0 += kTile) {
      const int i1 = std::min(rows, i0 + kTile), j1 = std::min(cols, j0 + kTile);
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j) dst[static_cast<std::size_t>(j) * rows + i] = src[static_cast<std::size_t>(i) * cols + j];
    }
  }
}

void im2col(const double* image, int channels, int height, int width, const ConvGeometry& g, double* col) {
  const int oh = g.out_h(height), ow = g.out_w(width);
  const std::size_t positions = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < channels; ++ci) {
    const double* plane = image + static_cast<std::size_t>(ci) * height * width;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        double* dst = col + ((static_cast<std::size_t>(ci) * g.kernel_h + ky) * g.kernel_w + kx) * positions;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad_h + ky;
          double* row = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= height) {
            std::fill(row, row + ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad_w + kx;
            row[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int channels, int height, int width, const ConvGeometry& g, double* image) {
  const int oh = g.out_h(height), ow = g.out_w(width);
  const std::size_t positions = static_cast<std::size_t>(oh) * ow;
  // Channels are independent; within a channel taps are added in a fixed order.
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < channels; ++ci) {
    double* plane = image + static_cast<std::size_t>(ci) * height * width;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        const double* src = col + ((static_cast<std::size_t>(ci) * g.kernel_h + ky) * g.kernel_w + kx) * positions;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad_h + ky;
          if (iy < 0 || iy >= height) continue;
          double* row = plane + static_cast<std::size_t>(iy) * width;
          const double* s = src + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad_w + kx;
            if (ix >= 0 && ix < width) row[ix] += s[ox];
          }
        }
      }
    }
  }
}

namespace {

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias,
                      const ConvGeometry& g) {
  check_conv_shapes(input, weight, g);
  const int co = weight.n();
  const int oh = g.out_h(input.h()), ow = g.out_w(input.w());
  const int kdim = weight.c() * g.kernel_h * g.kernel_w;
  const int positions = oh * ow;
  Tensor out(input.n(), co, oh, ow);
  std::vector<double> col;
  if (!is_pointwise(g)) col.resize(static_cast<std::size_t>(kdim) * positions);
  for (int n = 0; n < input.n(); ++n) {
    const double* b = input.sample(n);
    if (!col.empty()) {
      im2col(input.sample(n), input.c(), input.h(), input.w(), g, col.data());
      b = col.data();
    }
    double* y = out.sample(n);
    for (int o = 0; o < co; ++o) std::fill(y + static_cast<std::size_t>(o) * positions,
                                           y + static_cast<std::size_t>(o + 1) * positions, bias.empty() ? 0.0 : bias[o]);
    gemm(co, positions, kdim, weight.data(), b, y, true);
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& weight, const ConvGeometry& g,
                             int in_h, int in_w) {
  const int co = weight.n(), ci = weight.c();
  const int kdim = ci * g.kernel_h * g.kernel_w;
  const int positions = grad_output.h() * grad_output.w();
  std::vector<double> wt(static_cast<std::size_t>(kdim) * co);
  transpose(co, kdim, weight.data(), wt.data());
  Tensor grad_input(grad_output.n(), ci, in_h, in_w);
  std::vector<double> col;
  if (!is_pointwise(g)) col.resize(static_cast<std::size_t>(kdim) * positions);
  for (int n = 0; n < grad_output.n(); ++n) {
    if (col.empty()) {
      gemm(kdim, positions, co, wt.data(), grad_output.sample(n), grad_input.sample(n), false);
    } else {
      gemm(kdim, positions, co, wt.data(), grad_output.sample(n), col.data(), false);
      col2im(col.data(), ci, in_h, in_w, g, grad_input.sample(n));
    }
  }
  return grad_input;
}

void conv2d_backward_params(const Tensor& input, const Tensor& grad_output, const ConvGeometry& g,
                            Tensor& grad_weight, std::span<double> grad_bias) {
  const int co = grad_weight.n();
  const int kdim = input.c() * g.kernel_h * g.kernel_w;
  const int positions = grad_output.h() * grad_output.w();
  std::vector<double> col(static_cast<std::size_t>(kdim) * positions);
  std::vector<double> col_t(col.size());
  for (int n = 0; n < input.n(); ++n) {
    if (is_pointwise(g)) {
      std::copy(input.sample(n), input.sample(n) + col.size(), col.begin());
    } else {
      im2col(input.sample(n), input.c(), input.h(), input.w(), g, col.data());
    }
    transpose(kdim, positions, col.data(), col_t.data());
    gemm(co, kdim, positions, grad_output.sample(n), col_t.data(), grad_weight.data(), true);
    if (!grad_bias.empty()) {
      for (int o = 0; o < co; ++o) {
        const double* gy = grad_output.channel(n, o);
        double acc = 0.0;
        for (int p = 0; p < positions; ++p) acc += gy[p];
        grad_bias[o] += acc;
      }
    }
  }
}

Tensor upconv2x2_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias) {
  if (weight.n() != input.c() || weight.h() != 2 || weight.w() != 2) {
    throw Error(ErrorKind::kInvalidInput, "upconv weight " + weight.shape_string() + " does not match input " +
                                              input.shape_string());
  }
  const int ci = input.c(), co = weight.c(), h = input.h(), w = input.w();
  Tensor out(input.n(), co, 2 * h, 2 * w);
  for (int n = 0; n < input.n(); ++n) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
      double* y = out.channel(n, o);
      std::fill(y, y + 4 * static_cast<std::size_t>(h) * w, bias.empty() ? 0.0 : bias[o]);
      for (int i = 0; i < ci; ++i) {
        const double* x = input.channel(n, i);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const double wv = weight.at(i, o, dy, dx);
            for (int yy = 0; yy < h; ++yy) {
              double* dst = y + static_cast<std::size_t>(2 * yy + dy) * 2 * w + dx;
              const double* src = x + static_cast<std::size_t>(yy) * w;
              for (int xx = 0; xx < w; ++xx) dst[2 * xx] += wv * src[xx];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor upconv2x2_backward_input(const Tensor& grad_output, const Tensor& weight) {
  const int ci = weight.n(), co = weight.c();
  const int h = grad_output.h() / 2, w = grad_output.w() / 2;
  Tensor grad_input(grad_output.n(), ci, h, w);
  for (int n = 0; n < grad_output.n(); ++n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ci; ++i) {
      double* gx = grad_input.channel(n, i);
      for (int o = 0; o < co; ++o) {
        const double* gy = grad_output.channel(n, o);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const double wv = weight.at(i, o, dy, dx);
            for (int yy = 0; yy < h; ++yy) {
              const double* src = gy + static_cast<std::size_t>(2 * yy + dy) * 2 * w + dx;
              double* dst = gx + static_cast<std::size_t>(yy) * w;
              for (int xx = 0; xx < w; ++xx) dst[xx] += wv * src[2 * xx];
            }
          }
        }
      }
    }
  }
  return grad_input;
}

void upconv2x2_backward_params(const Tensor& input, const Tensor& grad_output, Tensor& grad_weight,
                               std::span<double> grad_bias) {
  const int ci = input.c(), co = grad_output.c(), h = input.h(), w = input.w();
  for (int n = 0; n < input.n(); ++n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ci; ++i) {
      const double* x = input.channel(n, i);
      for (int o = 0; o < co; ++o) {
        const double* gy = grad_output.channel(n, o);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            double acc = 0.0;
            for (int yy = 0; yy < h; ++yy) {
              const double* g = gy + static_cast<std::size_t>(2 * yy + dy) * 2 * w + dx;
              const double* src = x + static_cast<std::size_t>(yy) * w;
              for (int xx = 0; xx < w; ++xx) acc += src[xx] * g[2 * xx];
            }
            grad_weight.at(i, o, dy, dx) += acc;
          }
        }
      }
    }
    if (!grad_bias.empty()) {
      for (int o = 0; o < co; ++o) {
        const double* gy = grad_output.channel(n, o);
        double acc = 0.0;
        for (std::size_t p = 0; p < grad_output.plane(); ++p) acc += gy[p];
        grad_bias[o] += acc;
      }
    }
  }
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, std::span<const double> bias) {
  const int in_features = static_cast<int>(input.sample_size());
  if (weight.c() != in_features) {
    throw Error(ErrorKind::kInvalidInput, "linear weight " + weight.shape_string() + " does not match input " +
                                              input.shape_string());
  }
  const int out_features = weight.n();
  Tensor out(input.n(), out_features, 1, 1);
  for (int n = 0; n < input.n(); ++n) {
    const double* x = input.sample(n);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_features; ++o) {
      const double* wrow = weight.data() + static_cast<std::size_t>(o) * in_features;
      double acc = bias.empty() ? 0.0 : bias[o];
      for (int i = 0; i < in_features; ++i) acc += wrow[i] * x[i];
      out.at(n, o, 0, 0) = acc;
    }
  }
  return out;
}

Tensor linear_backward_input(const Tensor& grad_output, const Tensor& weight, const std::array<int, 4>& in_shape) {
  Tensor grad_input(in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
  const int in_features = weight.c(), out_features = weight.n();
  for (int n = 0; n < grad_output.n(); ++n) {
    gemm(1, in_features, out_features, grad_output.sample(n), weight.data(), grad_input.sample(n), false);
  }
  return grad_input;
}

void linear_backward_params(const Tensor& input, const Tensor& grad_output, Tensor& grad_weight,
                            std::span<double> grad_bias) {
  const int in_features = grad_weight.c(), out_features = grad_weight.n();
  for (int n = 0; n < input.n(); ++n) {
    const double* x = input.sample(n);
    const double* gy = grad_output.sample(n);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_features; ++o) {
      double* gw = grad_weight.data() + static_cast<std::size_t>(o) * in_features;
      for (int i = 0; i < in_features; ++i) gw[i] += gy[o] * x[i];
    }
    if (!grad_bias.empty()) {
      for (int o = 0; o < out_features; ++o) grad_bias[o] += gy[o];
    }
  }
}

Tensor maxpool_forward(const Tensor& input, const PoolGeometry& g, std::vector<int>& argmax) {
  const int oh = g.out_size(input.h()), ow = g.out_size(input.w());
  if (oh < 1 || ow < 1) throw Error(ErrorKind::kInvalidInput, "pool input " + input.shape_string() + " too small");
  Tensor out(input.n(), input.c(), oh, ow);
  argmax.assign(out.size(), 0);
  const int planes = input.n() * input.c();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* x = input.data() + static_cast<std::size_t>(p) * input.plane();
    double* y = out.data() + static_cast<std::size_t>(p) * out.plane();
    int* am = argmax.data() + static_cast<std::size_t>(p) * out.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= input.h()) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= input.w()) continue;
            const int idx = iy * input.w() + ix;
            if (x[idx] > best || best_idx < 0) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        y[oy * ow + ox] = best;
        am[oy * ow + ox] = best_idx;
      }
    }
  }
  return out;
}

Tensor maxpool_backward(const Tensor& grad_output, const std::vector<int>& argmax, const std::array<int, 4>& in_shape) {
  Tensor grad_input(in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
  const int planes = in_shape[0] * in_shape[1];
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* gy = grad_output.data() + static_cast<std::size_t>(p) * grad_output.plane();
    const int* am = argmax.data() + static_cast<std::size_t>(p) * grad_output.plane();
    double* gx = grad_input.data() + static_cast<std::size_t>(p) * grad_input.plane();
    for (std::size_t i = 0; i < grad_output.plane(); ++i) gx[am[i]] += gy[i];
  }
  return grad_input;
}

Tensor avgpool_forward(const Tensor& input, const PoolGeometry& g) {
  const int oh = g.out_size(input.h()), ow = g.out_size(input.w());
  if (oh < 1 || ow < 1) throw Error(ErrorKind::kInvalidInput, "pool input " + input.shape_string() + " too small");
  Tensor out(input.n(), input.c(), oh, ow);
  const double inv = 1.0 / (g.kernel * g.kernel);
  const int planes = input.n() * input.c();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* x = input.data() + static_cast<std::size_t>(p) * input.plane();
    double* y = out.data() + static_cast<std::size_t>(p) * out.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= input.h()) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < input.w()) acc += x[iy * input.w() + ix];
          }
        }
        y[oy * ow + ox] = acc * inv;
      }
    }
  }
  return out;
}

Tensor avgpool_backward(const Tensor& grad_output, const PoolGeometry& g, const std::array<int, 4>& in_shape) {
  Tensor grad_input(in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
  const double inv = 1.0 / (g.kernel * g.kernel);
  const int planes = in_shape[0] * in_shape[1];
  const int ih = in_shape[2], iw = in_shape[3];
  const int oh = grad_output.h(), ow = grad_output.w();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* gy = grad_output.data() + static_cast<std::size_t>(p) * grad_output.plane();
    double* gx = grad_input.data() + static_cast<std::size_t>(p) * grad_input.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double v = gy[oy * ow + ox] * inv;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= ih) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < iw) gx[iy * iw + ix] += v;
          }
        }
      }
    }
  }
  return grad_input;
}

}  // namespace lungscope::nn::kernels
