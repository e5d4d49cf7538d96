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
#include <string>
#include <string_view>

#include "lungscope/image.hpp"

namespace lungscope {

enum class EnhancementMethod { kHE, kCLAHE, kUnsharpGaussian, kUnsharpLaplacian, kButterworthLowpass };

/// CLI spelling: he | clahe | unsharp-g | unsharp-l | butterworth.
std::string_view to_string(EnhancementMethod method);
EnhancementMethod parse_enhancement_method(std::string_view text);

struct EnhancementConfig {
  EnhancementMethod method = EnhancementMethod::kHE;
  double clahe_clip = 2.0;
  int clahe_tile_rows = 8;
  int clahe_tile_cols = 8;
  double unsharp_sigma = 2.0;
  double unsharp_amount = 1.0;
  double laplacian_amount = 1.0;
  int butterworth_order = 2;
  double butterworth_cutoff = 0.25;

  /// Throws kInvalidConfig when the selected method's parameters are unusable.
  void validate() const;
};

/// Global histogram equalisation with darkest-bin rescaling. Constant images
/// come back unchanged.
RasterImage hist_equalize(const RasterImage& img);

/// The 256-entry lookup table hist_equalize applies.
std::array<std::uint8_t, 256> equalization_lut(const std::array<std::size_t, 256>& histogram);

/// Contrast-limited adaptive equalisation. `clip` is relative to the mean
/// bin height of a tile (clip * tile_pixels / 256 counts per bin).
RasterImage clahe(const RasterImage& img, double clip, int tile_rows, int tile_cols);

/// Per-tile lookup tables, row-major over the tile grid.
std::vector<std::array<std::uint8_t, 256>> clahe_tile_luts(const RasterImage& img, double clip,
                                                           int tile_rows, int tile_cols);

/// out = img + amount * (img - gaussian_blur(img, sigma)), reflect-101 borders.
RasterImage unsharp_gaussian(const RasterImage& img, double sigma, double amount);

/// out = img - amount * laplacian(img) with the 4-neighbour kernel.
RasterImage unsharp_laplacian(const RasterImage& img, double amount);

/// Frequency-domain Butterworth low pass; cutoff is a fraction of the
/// sampling rate in (0, 0.5].
RasterImage butterworth_lowpass(const RasterImage& img, int order, double cutoff);

/// Transfer function value at normalised radial frequency d.
double butterworth_gain(double d, int order, double cutoff);

/// Separable Gaussian blur on doubles (no rounding), reflect-101 borders.
std::vector<double> gaussian_blur(const RasterImage& img, double sigma);

RasterImage enhance(const RasterImage& img, const EnhancementConfig& cfg);

}  // namespace lungscope
