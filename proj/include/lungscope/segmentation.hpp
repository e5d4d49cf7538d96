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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "lungscope/image.hpp"
#include "lungscope/nn/layers.hpp"

namespace lungscope {

/// Binary lung mask; every value is 0 or 1.
class LungMask {
 public:
  LungMask() = default;
  LungMask(int width, int height, std::uint8_t fill = 0);
  LungMask(int width, int height, std::vector<std::uint8_t> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint8_t at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, bool on) { values_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }
  const std::vector<std::uint8_t>& values() const noexcept { return values_; }
  std::size_t count() const;

  LungMask complement() const;
  /// 0/255 grayscale rendering.
  RasterImage to_image() const;
  /// Any nonzero pixel of a single-channel image counts as inside.
  static LungMask from_image(const RasterImage& img);

  bool operator==(const LungMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> values_;
};

struct UNetConfig {
  int depth = 4;
  int base_channels = 8;
  int input_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SegmentationTrainingMeta {
  int epochs = 0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
};

/// Encoder/decoder with skip connections at every level and a single logit
/// output channel.
class UNet : public nn::Layer {
 public:
  explicit UNet(const UNetConfig& cfg);

  nn::Tensor forward(const nn::Tensor& input) override;
  nn::Tensor backward(const nn::Tensor& grad_output) override;
  void collect_parameters(std::vector<nn::Parameter*>& out) override;
  std::string describe() const override;

 private:
  std::vector<nn::Sequential> encoders_;
  std::vector<nn::MaxPool> pools_;
  nn::Sequential bottleneck_;
  std::vector<nn::UpConv2x2> ups_;
  std::vector<nn::Sequential> decoders_;
  nn::Sequential head_;
  std::vector<int> skip_channels_;
};

class SegmentationModel {
 public:
  explicit SegmentationModel(const UNetConfig& cfg);

  const UNetConfig& config() const noexcept { return config_; }
  const SegmentationTrainingMeta& training_meta() const noexcept { return meta_; }
  SegmentationTrainingMeta& training_meta() noexcept { return meta_; }
  UNet& network() { return *net_; }
  std::vector<nn::Parameter*> parameters();

  void save(const std::filesystem::path& path);
  static SegmentationModel load(const std::filesystem::path& path);

 private:
  UNetConfig config_;
  std::unique_ptr<UNet> net_;
  SegmentationTrainingMeta meta_;
};

/// Real-valued probability map, row-major.
struct ProbabilityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

SegmentationModel build_unet(const UNetConfig& cfg);

struct SegmentationSample {
  RasterImage image;
  LungMask mask;
};

struct UNetTrainOptions {
  int epochs = 30;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Minimises BCE + soft Dice (equal weights), one optimiser step per sample.
/// Images must be single-channel at the configured input size.
void train_unet(SegmentationModel& model, const std::vector<SegmentationSample>& pairs,
                const UNetTrainOptions& options);

ProbabilityMap predict_mask(SegmentationModel& model, const RasterImage& img);

struct BinarizeOptions {
  double threshold = 0.5;
  bool keep_two_largest = false;
};

LungMask binarize_mask(const ProbabilityMap& probs, const BinarizeOptions& options = {});

/// 4-connected component labelling; returns per-pixel labels (0 = background)
/// and the number of components.
std::pair<std::vector<int>, int> label_components(const LungMask& mask);
LungMask keep_largest_components(const LungMask& mask, int keep);

RasterImage apply_mask(const RasterImage& img, const LungMask& mask);

LungMask resize_mask(const LungMask& mask, int width, int height);

/// 2|A n B| / (|A| + |B|); two empty masks score 1.
double dice(const LungMask& a, const LungMask& b);

namespace detail {
/// Combined loss and dL/dlogit for one logit map against a binary target.
double bce_dice_loss(std::span<const double> logits, std::span<const std::uint8_t> target,
                     std::vector<double>* grad);
}  // namespace detail

}  // namespace lungscope
