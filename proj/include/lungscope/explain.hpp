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
#include <cstdint>
#include <optional>
#include <vector>

#include "lungscope/classifier.hpp"
#include "lungscope/image.hpp"
#include "lungscope/segmentation.hpp"

namespace lungscope {

/// Class-activation relevance at the explained input's resolution, values in
/// [0, 1] with max 1 unless identically zero.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  ClassLabel target_class = ClassLabel::kCovid;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct Explanation {
  Prediction prediction;
  Heatmap heatmap;
  Heatmap counterfactual;
};

struct GradCamOptions {
  /// Number of feature modules whose output is explained; defaults to the
  /// whole feature stack (the final convolutional block).
  std::optional<std::size_t> layer;
  bool nearest_upsampling = false;
};

/// Grad-CAM for the target class probability. Calls against one model must
/// be serialised; parameter gradients are left zeroed.
Heatmap grad_cam(TrainedClassifier& model, const RasterImage& img, ClassLabel target,
                 const GradCamOptions& options = {});

/// Prediction plus maps for the predicted and the opposite class.
Explanation counterfactual_cam(TrainedClassifier& model, const RasterImage& img,
                               const GradCamOptions& options = {});

/// Blue (0) to yellow (1) ramp.
std::array<std::uint8_t, 3> ramp_color(double h);

/// round((1 - alpha) * gray + alpha * ramp(h)) per channel.
RasterImage overlay_heatmap(const RasterImage& img, const Heatmap& hm, double alpha);

/// Heatmap rendered through the colour ramp.
RasterImage heatmap_image(const Heatmap& hm);

/// Share of total relevance that falls outside the mask; 0 for an all-zero map.
double out_of_mask_relevance(const Heatmap& hm, const LungMask& mask);

namespace detail {

struct CamTrace {
  Prediction prediction;
  /// Activations A of the explained layer, shape (1, K, h, w).
  nn::Tensor activations;
  /// dp_target / dA.
  nn::Tensor gradients;
  /// Spatial means of `gradients`, one per channel.
  std::vector<double> alphas;
  /// sum_k alpha_k A_k before ReLU, h x w.
  std::vector<double> raw;
};

CamTrace cam_trace(TrainedClassifier& model, const RasterImage& img, ClassLabel target, const GradCamOptions& options);

/// ReLU, upsample to (width, height) and max-normalise a raw map.
Heatmap finish_map(const std::vector<double>& raw, int map_w, int map_h, int width, int height, ClassLabel target,
                   bool nearest);

}  // namespace detail

}  // namespace lungscope
