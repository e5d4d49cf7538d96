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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lungscope {

/// 8-bit raster, row-major, channels interleaved (RGB order for 3 channels).
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, std::uint8_t fill = 0);
  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t at(int x, int y, int c = 0) const { return pixels_[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c = 0) { return pixels_[index(x, y, c)]; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  bool operator==(const RasterImage&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

enum class ClassLabel : std::uint8_t { kCovid = 0, kNormal = 1 };

inline constexpr std::array<ClassLabel, 2> kAllLabels{ClassLabel::kCovid, ClassLabel::kNormal};

std::string_view to_string(ClassLabel label);
ClassLabel parse_label(std::string_view text);
inline ClassLabel other(ClassLabel label) {
  return label == ClassLabel::kCovid ? ClassLabel::kNormal : ClassLabel::kCovid;
}
inline int class_index(ClassLabel label) { return static_cast<int>(label); }

struct LabeledImage {
  RasterImage image;
  ClassLabel label = ClassLabel::kNormal;
  std::string source_id;
  // Set by augmentation; `origin_id` then names the image it was derived from.
  bool augmented = false;
  std::string origin_id;
};

/// Real-valued image in planar (channel-major) layout.
struct RealGrid {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;

  double at(int x, int y, int c = 0) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int x, int y, int c = 0) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

RasterImage to_grayscale(const RasterImage& img);

/// Replicates a single-channel image into three identical channels.
RasterImage gray_to_rgb(const RasterImage& img);

/// Bilinear resize with half-pixel centres; same-size calls return a copy.
RasterImage resize(const RasterImage& img, int width, int height);
RasterImage resize_nearest(const RasterImage& img, int width, int height);

/// Bilinear resample of a single real-valued plane.
std::vector<double> resize_plane(std::span<const double> plane, int width, int height,
                                 int out_width, int out_height);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;

  static NormalizationStats imagenet();
  static NormalizationStats unit(int channels);
};

/// (v/255 - mean) / std per channel; a single-channel image with 3-channel
/// stats is replicated first.
RealGrid normalize_for_model(const RasterImage& img, const NormalizationStats& stats);
RealGrid denormalize(const RealGrid& grid, const NormalizationStats& stats);

std::uint8_t clamp_to_byte(double value);

}  // namespace lungscope
