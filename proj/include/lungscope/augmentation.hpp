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
#include <string>
#include <string_view>
#include <vector>

#include "lungscope/classifier.hpp"
#include "lungscope/image.hpp"

namespace lungscope {

/// The four label-preserving augmentations. Horizontal flipping is not one of
/// them: it mirrors the heart's side and yields anatomically invalid films.
enum class AugmentationKind { kTilt45, kScaleTo350x450, kContrastUp, kCenterCrop };

inline constexpr AugmentationKind kAllAugmentations[] = {AugmentationKind::kTilt45, AugmentationKind::kScaleTo350x450,
                                                         AugmentationKind::kContrastUp, AugmentationKind::kCenterCrop};

std::string_view to_string(AugmentationKind kind);
/// Accepts the names produced by to_string; flip spellings are rejected with
/// an explanatory invalid-config error.
AugmentationKind parse_augmentation_kind(std::string_view text);

struct AugmentationOp {
  AugmentationKind kind = AugmentationKind::kTilt45;
  double contrast_factor = 1.5;
  double crop_fraction = 0.8;

  void validate() const;
};

/// Rotation about the image centre by `degrees` (counter-clockwise as
/// displayed), same canvas, zero fill, bilinear sampling.
RasterImage rotate(const RasterImage& img, double degrees);
/// clamp(mean + factor * (v - mean)) with a per-channel mean.
RasterImage adjust_contrast(const RasterImage& img, double factor);
/// Central `fraction` of each side, resized back to the original size.
RasterImage center_crop(const RasterImage& img, double fraction);

LabeledImage apply_augmentation(const LabeledImage& img, const AugmentationOp& op);

struct SweepConfig {
  int step = 240;
  int total = 2400;
  int per_op_per_class = 300;
  std::uint64_t seed = 0;
  double contrast_factor = 1.5;
  double crop_fraction = 0.8;

  void validate() const;
  std::vector<AugmentationOp> ops() const;
};

/// per_op_per_class sources per (op, class), sampled without replacement,
/// then shuffled together so every prefix mixes ops and classes.
std::vector<LabeledImage> generate_augmented_set(const std::vector<LabeledImage>& pool, const SweepConfig& cfg);

struct SweepRow {
  std::string model;
  int augmented_count = 0;
  double augmented_fraction = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  std::string to_csv() const;
};

inline constexpr std::string_view kSweepCsvHeader = "model,augmented_count,augmented_fraction,train_acc,test_acc";
std::string format_sweep_row(const SweepRow& row);

struct DatasetSplits {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> val;
  std::vector<LabeledImage> test;
};

/// Throws a data-leak error if any augmented image derives from a test image
/// or the test split itself holds augmented images.
void assert_no_leak(const std::vector<LabeledImage>& test, const std::vector<LabeledImage>& augmented);

/// One train/evaluate experiment: fresh model from `spec`, trained on
/// train (+ extra), scored on the test split. Images are resized to the
/// architecture input.
SweepRow run_experiment(const ArchitectureSpec& spec, const DatasetSplits& splits,
                        const std::vector<LabeledImage>& extra, const TrainConfig& train_cfg);

SweepResult run_sweep(const DatasetSplits& splits, const std::vector<LabeledImage>& augmented_pool,
                      const std::vector<ArchitectureSpec>& archs, const TrainConfig& train_cfg,
                      const SweepConfig& sweep_cfg);

}  // namespace lungscope
