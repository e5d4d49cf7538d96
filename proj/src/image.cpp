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

#include "lungscope/image.hpp"

#include <algorithm>
#include <cmath>

#include "lungscope/errors.hpp"

namespace lungscope {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidImage: return "invalid-image";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kInvalidData: return "invalid-data";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInvalidModel: return "invalid-model";
    case ErrorKind::kInvalidLayout: return "invalid-layout";
    case ErrorKind::kInvalidSplit: return "invalid-split";
    case ErrorKind::kResource: return "resource";
    case ErrorKind::kDataLeak: return "data-leak";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

namespace {

void check_dims(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kInvalidImage, "image dimensions must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorKind::kInvalidImage,
                "channel count must be 1 or 3, got " + std::to_string(channels));
  }
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  check_dims(width, height, channels);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorKind::kInvalidImage, "pixel count does not match width*height*channels");
  }
}

std::string_view to_string(ClassLabel label) {
  return label == ClassLabel::kCovid ? "covid" : "normal";
}

ClassLabel parse_label(std::string_view text) {
  if (text == "covid") return ClassLabel::kCovid;
  if (text == "normal") return ClassLabel::kNormal;
  throw Error(ErrorKind::kInvalidData, "unknown class label '" + std::string(text) + "'");
}

std::uint8_t clamp_to_byte(double value) {
  if (!(value > 0.0)) return 0;
  if (value >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(value));
}

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw Error(ErrorKind::kInvalidImage, "to_grayscale expects 1 or 3 channels");
  }
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double luma = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = clamp_to_byte(luma);
  }
  return out;
}

RasterImage gray_to_rgb(const RasterImage& img) {
  if (img.channels() == 3) return img;
  RasterImage out(img.width(), img.height(), 3);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-centre sampling positions along one axis.
std::vector<Tap> bilinear_taps(int in_size, int out_size) {
  std::vector<Tap> taps(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in_size - 1);
    taps[i] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

RasterImage resize(const RasterImage& img, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kInvalidArgument, "resize target dimensions must be positive");
  }
  if (width == img.width() && height == img.height()) return img;
  const auto xs = bilinear_taps(img.width(), width);
  const auto ys = bilinear_taps(img.height(), height);
  RasterImage out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    const Tap ty = ys[y];
    for (int x = 0; x < width; ++x) {
      const Tap tx = xs[x];
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1.0 - tx.frac) * img.at(tx.lo, ty.lo, c) + tx.frac * img.at(tx.hi, ty.lo, c);
        const double bottom =
            (1.0 - tx.frac) * img.at(tx.lo, ty.hi, c) + tx.frac * img.at(tx.hi, ty.hi, c);
        out.at(x, y, c) = clamp_to_byte((1.0 - ty.frac) * top + ty.frac * bottom);
      }
    }
  }
  return out;
}

RasterImage resize_nearest(const RasterImage& img, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kInvalidArgument, "resize target dimensions must be positive");
  }
  RasterImage out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1,
                            static_cast<int>((y + 0.5) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>((x + 0.5) * img.width() / width));
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

std::vector<double> resize_plane(std::span<const double> plane, int width, int height,
                                 int out_width, int out_height) {
  if (out_width == width && out_height == height) return {plane.begin(), plane.end()};
  const auto xs = bilinear_taps(width, out_width);
  const auto ys = bilinear_taps(height, out_height);
  std::vector<double> out(static_cast<std::size_t>(out_width) * out_height);
  auto px = [&](int x, int y) { return plane[static_cast<std::size_t>(y) * width + x]; };
  for (int y = 0; y < out_height; ++y) {
    const Tap ty = ys[y];
    for (int x = 0; x < out_width; ++x) {
      const Tap tx = xs[x];
      const double top = (1.0 - tx.frac) * px(tx.lo, ty.lo) + tx.frac * px(tx.hi, ty.lo);
      const double bottom = (1.0 - tx.frac) * px(tx.lo, ty.hi) + tx.frac * px(tx.hi, ty.hi);
      out[static_cast<std::size_t>(y) * out_width + x] = (1.0 - ty.frac) * top + ty.frac * bottom;
    }
  }
  return out;
}

NormalizationStats NormalizationStats::imagenet() {
  return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
}

NormalizationStats NormalizationStats::unit(int channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

namespace {

void check_stats(const NormalizationStats& stats) {
  if (stats.mean.empty() || stats.mean.size() != stats.std.size()) {
    throw Error(ErrorKind::kInvalidArgument, "normalization mean/std sizes differ");
  }
  for (double s : stats.std) {
    if (s == 0.0) throw Error(ErrorKind::kInvalidArgument, "normalization std component is zero");
  }
}

}  // namespace

RealGrid normalize_for_model(const RasterImage& img, const NormalizationStats& stats) {
  check_stats(stats);
  const int channels = static_cast<int>(stats.mean.size());
  if (img.channels() != channels && !(img.channels() == 1 && channels == 3)) {
    throw Error(ErrorKind::kInvalidArgument, "normalization stats do not match image channels");
  }
  RealGrid grid{img.width(), img.height(), channels, {}};
  grid.values.resize(static_cast<std::size_t>(channels) * img.width() * img.height());
  for (int c = 0; c < channels; ++c) {
    const int src_c = img.channels() == 1 ? 0 : c;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        grid.at(x, y, c) = (img.at(x, y, src_c) / 255.0 - stats.mean[c]) / stats.std[c];
      }
    }
  }
  return grid;
}

RealGrid denormalize(const RealGrid& grid, const NormalizationStats& stats) {
  check_stats(stats);
  if (static_cast<int>(stats.mean.size()) != grid.channels) {
    throw Error(ErrorKind::kInvalidArgument, "normalization stats do not match grid channels");
  }
  RealGrid out = grid;
  const std::size_t plane = static_cast<std::size_t>(grid.width) * grid.height;
  for (int c = 0; c < grid.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out.values[c * plane + i] = grid.values[c * plane + i] * stats.std[c] + stats.mean[c];
    }
  }
  return out;
}

}  // namespace lungscope
