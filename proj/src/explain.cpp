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

#include "lungscope/explain.hpp"

#include <algorithm>
#include <cmath>

#include "lungscope/errors.hpp"

namespace lungscope {

namespace detail {

CamTrace cam_trace(TrainedClassifier& model, const RasterImage& img, ClassLabel target,
                   const GradCamOptions& options) {
  if (!model.ready()) throw Error(ErrorKind::kInvalidModel, "cannot explain an untrained model");
  auto& features = model.features();
  const std::size_t split = options.layer.value_or(features.size());
  if (split == 0 || split > features.size()) {
    throw Error(ErrorKind::kInvalidModel, "explained layer index " + std::to_string(split) + " outside 1.." +
                                              std::to_string(features.size()));
  }
  const nn::Tensor input = model.to_input(img);

  CamTrace trace;
  trace.activations = features.forward_range(input, 0, split);
  const nn::Tensor out = model.head().forward(features.forward_range(trace.activations, split, features.size()));
  if (out.size() != 2) throw Error(ErrorKind::kInvalidModel, "classifier head must emit 2 scores");
  trace.prediction = prediction_from_scores(out[0], out[1]);

  // d p_t / d z_j = p_t (delta_tj - p_j)
  const int t = class_index(target);
  const auto& p = trace.prediction.probabilities;
  nn::Tensor grad = nn::Tensor::like(out);
  for (int j = 0; j < 2; ++j) grad[j] = p[t] * ((j == t ? 1.0 : 0.0) - p[j]);
  trace.gradients = features.backward_range(model.head().backward(grad), split, features.size());
  nn::zero_grad(model.parameters());

  const nn::Tensor& a = trace.activations;
  const std::size_t plane = a.plane();
  trace.alphas.assign(a.c(), 0.0);
  trace.raw.assign(plane, 0.0);
  for (int k = 0; k < a.c(); ++k) {
    const double* g = trace.gradients.channel(0, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += g[i];
    trace.alphas[k] = sum / static_cast<double>(plane);
  }
  for (int k = 0; k < a.c(); ++k) {
    const double* ak = a.channel(0, k);
    for (std::size_t i = 0; i < plane; ++i) trace.raw[i] += trace.alphas[k] * ak[i];
  }
  return trace;
}

Heatmap finish_map(const std::vector<double>& raw, int map_w, int map_h, int width, int height, ClassLabel target,
                   bool nearest) {
  std::vector<double> positive(raw.size());
  std::transform(raw.begin(), raw.end(), positive.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  Heatmap hm;
  hm.width = width;
  hm.height = height;
  hm.target_class = target;
  if (map_w == width && map_h == height) {
    hm.values = std::move(positive);
  } else if (nearest) {
    hm.values.resize(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
      const int sy = std::min(map_h - 1, static_cast<int>((static_cast<long>(y) * map_h) / height));
      for (int x = 0; x < width; ++x) {
        const int sx = std::min(map_w - 1, static_cast<int>((static_cast<long>(x) * map_w) / width));
        hm.values[static_cast<std::size_t>(y) * width + x] = positive[static_cast<std::size_t>(sy) * map_w + sx];
      }
    }
  } else {
    hm.values = resize_plane(positive, map_w, map_h, width, height);
  }
  const double peak = hm.values.empty() ? 0.0 : *std::max_element(hm.values.begin(), hm.values.end());
  if (peak > 0.0) {
    for (auto& v : hm.values) v = std::clamp(v / peak, 0.0, 1.0);
  } else {
    std::fill(hm.values.begin(), hm.values.end(), 0.0);
  }
  return hm;
}

}  // namespace detail

Heatmap grad_cam(TrainedClassifier& model, const RasterImage& img, ClassLabel target, const GradCamOptions& options) {
  const auto trace = detail::cam_trace(model, img, target, options);
  return detail::finish_map(trace.raw, trace.activations.w(), trace.activations.h(), img.width(), img.height(),
                            target, options.nearest_upsampling);
}

Explanation counterfactual_cam(TrainedClassifier& model, const RasterImage& img, const GradCamOptions& options) {
  Explanation ex;
  ex.prediction = predict(model, img);
  ex.heatmap = grad_cam(model, img, ex.prediction.label, options);
  ex.counterfactual = grad_cam(model, img, other(ex.prediction.label), options);
  return ex;
}

std::array<std::uint8_t, 3> ramp_color(double h) {
  h = std::clamp(h, 0.0, 1.0);
  return {clamp_to_byte(255.0 * h), clamp_to_byte(255.0 * h), clamp_to_byte(255.0 * (1.0 - h))};
}

namespace {

void check_dims(const RasterImage& img, const Heatmap& hm) {
  if (img.width() != hm.width || img.height() != hm.height) {
    throw Error(ErrorKind::kInvalidInput, "heatmap is " + std::to_string(hm.width) + "x" + std::to_string(hm.height) +
                                              ", image is " + std::to_string(img.width()) + "x" +
                                              std::to_string(img.height()));
  }
}

}  // namespace

RasterImage overlay_heatmap(const RasterImage& img, const Heatmap& hm, double alpha) {
  check_dims(img, hm);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "overlay alpha must lie in [0, 1]");
  const RasterImage gray = to_grayscale(img);
  RasterImage out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto color = ramp_color(hm.at(x, y));
      const double g = gray.at(x, y, 0);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_to_byte((1.0 - alpha) * g + alpha * color[c]);
    }
  }
  return out;
}

RasterImage heatmap_image(const Heatmap& hm) {
  RasterImage out(hm.width, hm.height, 3);
  for (int y = 0; y < hm.height; ++y) {
    for (int x = 0; x < hm.width; ++x) {
      const auto color = ramp_color(hm.at(x, y));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = color[c];
    }
  }
  return out;
}

double out_of_mask_relevance(const Heatmap& hm, const LungMask& mask) {
  if (mask.width() != hm.width || mask.height() != hm.height) {
    throw Error(ErrorKind::kInvalidInput, "mask and heatmap dimensions differ");
  }
  double total = 0.0;
  double outside = 0.0;
  for (int y = 0; y < hm.height; ++y) {
    for (int x = 0; x < hm.width; ++x) {
      const double v = hm.at(x, y);
      total += v;
      if (mask.at(x, y) == 0) outside += v;
    }
  }
  return total > 0.0 ? outside / total : 0.0;
}

}  // namespace lungscope
