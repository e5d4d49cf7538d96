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

#include "lungscope/enhancement.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>

#include <fftw3.h>

#include "lungscope/errors.hpp"

namespace lungscope {

std::string_view to_string(EnhancementMethod method) {
  switch (method) {
    case EnhancementMethod::kHE: return "he";
    case EnhancementMethod::kCLAHE: return "clahe";
    case EnhancementMethod::kUnsharpGaussian: return "unsharp-g";
    case EnhancementMethod::kUnsharpLaplacian: return "unsharp-l";
    case EnhancementMethod::kButterworthLowpass: return "butterworth";
  }
  return "he";
}

EnhancementMethod parse_enhancement_method(std::string_view text) {
  for (auto m : {EnhancementMethod::kHE, EnhancementMethod::kCLAHE, EnhancementMethod::kUnsharpGaussian,
                 EnhancementMethod::kUnsharpLaplacian, EnhancementMethod::kButterworthLowpass}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorKind::kInvalidConfig,
              "unknown enhancement method '" + std::string(text) +
                  "' (expected he|clahe|unsharp-g|unsharp-l|butterworth)");
}

void EnhancementConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kInvalidConfig, what);
  };
  switch (method) {
    case EnhancementMethod::kHE: break;
    case EnhancementMethod::kCLAHE:
      require(clahe_clip > 0, "clahe clip limit must be positive");
      require(clahe_tile_rows >= 1 && clahe_tile_cols >= 1, "clahe tile grid must be >= 1x1");
      break;
    case EnhancementMethod::kUnsharpGaussian:
      require(unsharp_sigma > 0, "unsharp sigma must be positive");
      require(unsharp_amount > 0, "unsharp amount must be positive");
      break;
    case EnhancementMethod::kUnsharpLaplacian:
      require(laplacian_amount > 0, "laplacian amount must be positive");
      break;
    case EnhancementMethod::kButterworthLowpass:
      require(butterworth_order >= 1, "butterworth order must be >= 1");
      require(butterworth_cutoff > 0 && butterworth_cutoff <= 0.5, "butterworth cutoff must lie in (0, 0.5]");
      break;
  }
}

namespace {

void require_single_channel(const RasterImage& img, const char* op) {
  if (img.channels() != 1) {
    throw Error(ErrorKind::kInvalidImage, std::string(op) + " expects a single-channel image");
  }
}

std::array<std::size_t, 256> histogram_of(const RasterImage& img, int x0, int y0, int x1, int y1) {
  std::array<std::size_t, 256> hist{};
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) ++hist[img.at(x, y)];
  }
  return hist;
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

std::array<std::uint8_t, 256> equalization_lut(const std::array<std::size_t, 256>& histogram) {
  std::array<std::uint8_t, 256> lut{};
  std::array<std::size_t, 256> cum{};
  std::partial_sum(histogram.begin(), histogram.end(), cum.begin());
  const std::size_t total = cum[255];
  std::size_t cum_min = 0;
  for (std::size_t c : cum) {
    if (c > 0) {
      cum_min = c;
      break;
    }
  }
  if (total == 0 || cum_min == total) {
    for (int v = 0; v < 256; ++v) lut[v] = static_cast<std::uint8_t>(v);
    return lut;
  }
  const std::size_t den = total - cum_min;
  for (int v = 0; v < 256; ++v) {
    if (cum[v] < cum_min) {
      lut[v] = 0;
      continue;
    }
    const std::size_t num = (cum[v] - cum_min) * 255;
    lut[v] = static_cast<std::uint8_t>((2 * num + den) / (2 * den));
  }
  return lut;
}

RasterImage hist_equalize(const RasterImage& img) {
  require_single_channel(img, "hist_equalize");
  const auto lut = equalization_lut(histogram_of(img, 0, 0, img.width(), img.height()));
  RasterImage out = img;
  for (auto& p : out.pixels()) p = lut[p];
  return out;
}

namespace {

struct TileGrid {
  std::vector<int> row_edges;  // size rows+1
  std::vector<int> col_edges;

  TileGrid(const RasterImage& img, int rows, int cols) {
    for (int r = 0; r <= rows; ++r) row_edges.push_back(static_cast<int>(static_cast<long>(r) * img.height() / rows));
    for (int c = 0; c <= cols; ++c) col_edges.push_back(static_cast<int>(static_cast<long>(c) * img.width() / cols));
  }
};

void check_clahe_args(const RasterImage& img, double clip, int tile_rows, int tile_cols) {
  require_single_channel(img, "clahe");
  if (!(clip > 0)) throw Error(ErrorKind::kInvalidArgument, "clahe clip limit must be positive");
  if (tile_rows < 1 || tile_cols < 1) throw Error(ErrorKind::kInvalidArgument, "clahe tile grid must be >= 1x1");
  if (tile_rows > img.height() || tile_cols > img.width()) {
    throw Error(ErrorKind::kInvalidArgument, "clahe tile grid exceeds image dimensions");
  }
}

// Interpolation anchors: tile centres along one axis.
struct Blend {
  int lo;
  int hi;
  double w;
};

std::vector<Blend> blend_positions(const std::vector<int>& edges, int size) {
  const int tiles = static_cast<int>(edges.size()) - 1;
  std::vector<double> centres(tiles);
  for (int t = 0; t < tiles; ++t) centres[t] = 0.5 * (edges[t] + edges[t + 1] - 1);
  std::vector<Blend> out(size);
  for (int i = 0; i < size; ++i) {
    if (i <= centres.front()) {
      out[i] = {0, 0, 0.0};
    } else if (i >= centres.back()) {
      out[i] = {tiles - 1, tiles - 1, 0.0};
    } else {
      int t = 0;
      while (centres[t + 1] <= i) ++t;
      out[i] = {t, t + 1, (i - centres[t]) / (centres[t + 1] - centres[t])};
    }
  }
  return out;
}

}  // namespace

std::vector<std::array<std::uint8_t, 256>> clahe_tile_luts(const RasterImage& img, double clip,
                                                           int tile_rows, int tile_cols) {
  check_clahe_args(img, clip, tile_rows, tile_cols);
  const TileGrid grid(img, tile_rows, tile_cols);
  std::vector<std::array<std::uint8_t, 256>> luts;
  luts.reserve(static_cast<std::size_t>(tile_rows) * tile_cols);
  for (int r = 0; r < tile_rows; ++r) {
    for (int c = 0; c < tile_cols; ++c) {
      auto hist = histogram_of(img, grid.col_edges[c], grid.row_edges[r], grid.col_edges[c + 1],
                               grid.row_edges[r + 1]);
      const std::size_t pixels = std::accumulate(hist.begin(), hist.end(), std::size_t{0});
      const double limit_real = clip * static_cast<double>(pixels) / 256.0;
      // A single occupied level keeps the identity mapping, as in global HE.
      const bool degenerate = std::count(hist.begin(), hist.end(), std::size_t{0}) == 255;
      if (!degenerate && limit_real < static_cast<double>(pixels)) {
        const auto limit = std::max<std::size_t>(1, static_cast<std::size_t>(limit_real));
        std::size_t excess = 0;
        for (auto& h : hist) {
          if (h > limit) {
            excess += h - limit;
            h = limit;
          }
        }
        const std::size_t per_bin = excess / 256;
        const std::size_t residual = excess % 256;
        for (auto& h : hist) h += per_bin;
        if (residual > 0) {
          const std::size_t step = std::max<std::size_t>(1, 256 / residual);
          for (std::size_t i = 0, done = 0; i < 256 && done < residual; i += step, ++done) ++hist[i];
        }
      }
      luts.push_back(equalization_lut(hist));
    }
  }
  return luts;
}

RasterImage clahe(const RasterImage& img, double clip, int tile_rows, int tile_cols) {
  const auto luts = clahe_tile_luts(img, clip, tile_rows, tile_cols);
  const TileGrid grid(img, tile_rows, tile_cols);
  const auto ys = blend_positions(grid.row_edges, img.height());
  const auto xs = blend_positions(grid.col_edges, img.width());
  auto lut = [&](int r, int c) -> const std::array<std::uint8_t, 256>& { return luts[r * tile_cols + c]; };
  RasterImage out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    const Blend by = ys[y];
    for (int x = 0; x < img.width(); ++x) {
      const Blend bx = xs[x];
      const std::uint8_t v = img.at(x, y);
      const double top = (1.0 - bx.w) * lut(by.lo, bx.lo)[v] + bx.w * lut(by.lo, bx.hi)[v];
      const double bottom = (1.0 - bx.w) * lut(by.hi, bx.lo)[v] + bx.w * lut(by.hi, bx.hi)[v];
      out.at(x, y) = clamp_to_byte((1.0 - by.w) * top + by.w * bottom);
    }
  }
  return out;
}

std::vector<double> gaussian_blur(const RasterImage& img, double sigma) {
  if (!(sigma > 0)) throw Error(ErrorKind::kInvalidArgument, "gaussian sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= norm;

  const int w = img.width(), h = img.height(), ch = img.channels();
  std::vector<double> tmp(img.size()), out(img.size());
  auto idx = [&](int x, int y, int c) { return (static_cast<std::size_t>(y) * w + x) * ch + c; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(reflect101(x + k, w), y, c);
        tmp[idx(x, y, c)] = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[idx(x, reflect101(y + k, h), c)];
        out[idx(x, y, c)] = acc;
      }
    }
  }
  return out;
}

RasterImage unsharp_gaussian(const RasterImage& img, double sigma, double amount) {
  const auto blurred = gaussian_blur(img, sigma);
  RasterImage out = img;
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = clamp_to_byte(src[i] + amount * (src[i] - blurred[i]));
  }
  return out;
}

RasterImage unsharp_laplacian(const RasterImage& img, double amount) {
  const int w = img.width(), h = img.height();
  RasterImage out = img;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const int centre = img.at(x, y, c);
        const int lap = img.at(reflect101(x - 1, w), y, c) + img.at(reflect101(x + 1, w), y, c) +
                        img.at(x, reflect101(y - 1, h), c) + img.at(x, reflect101(y + 1, h), c) - 4 * centre;
        out.at(x, y, c) = clamp_to_byte(centre - amount * lap);
      }
    }
  }
  return out;
}

double butterworth_gain(double d, int order, double cutoff) {
  return 1.0 / (1.0 + std::pow(d / cutoff, 2.0 * order));
}

namespace {

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RasterImage butterworth_lowpass(const RasterImage& img, int order, double cutoff) {
  if (order < 1) throw Error(ErrorKind::kInvalidArgument, "butterworth order must be >= 1");
  if (!(cutoff > 0 && cutoff <= 0.5)) {
    throw Error(ErrorKind::kInvalidArgument, "butterworth cutoff must lie in (0, 0.5]");
  }
  const int w = img.width(), h = img.height();
  const int wc = w / 2 + 1;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> spatial(n);
  std::vector<std::complex<double>> freq(static_cast<std::size_t>(h) * wc);
  fftw_plan forward, backward;
  {
    std::lock_guard lock(fftw_planner_mutex());
    auto* fbuf = reinterpret_cast<fftw_complex*>(freq.data());
    forward = fftw_plan_dft_r2c_2d(h, w, spatial.data(), fbuf, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(h, w, fbuf, spatial.data(), FFTW_ESTIMATE);
  }

  RasterImage out = img;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) spatial[static_cast<std::size_t>(y) * w + x] = img.at(x, y, c);
    fftw_execute(forward);
    for (int u = 0; u < h; ++u) {
      const double fu = static_cast<double>(std::min(u, h - u)) / h;
      for (int v = 0; v < wc; ++v) {
        const double fv = static_cast<double>(v) / w;
        freq[static_cast<std::size_t>(u) * wc + v] *= butterworth_gain(std::hypot(fu, fv), order, cutoff);
      }
    }
    fftw_execute(backward);  // c2r destroys its input; freq is refilled next channel
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(x, y, c) = clamp_to_byte(spatial[static_cast<std::size_t>(y) * w + x] / static_cast<double>(n));
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  return out;
}

RasterImage enhance(const RasterImage& img, const EnhancementConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case EnhancementMethod::kHE: return hist_equalize(img);
    case EnhancementMethod::kCLAHE: return clahe(img, cfg.clahe_clip, cfg.clahe_tile_rows, cfg.clahe_tile_cols);
    case EnhancementMethod::kUnsharpGaussian: return unsharp_gaussian(img, cfg.unsharp_sigma, cfg.unsharp_amount);
    case EnhancementMethod::kUnsharpLaplacian: return unsharp_laplacian(img, cfg.laplacian_amount);
    case EnhancementMethod::kButterworthLowpass:
      return butterworth_lowpass(img, cfg.butterworth_order, cfg.butterworth_cutoff);
  }
  return img;
}

}  // namespace lungscope
