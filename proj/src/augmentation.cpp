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

#include "lungscope/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include <fmt/format.h>

#include "lungscope/errors.hpp"
#include "lungscope/nn/layers.hpp"

namespace lungscope {

std::string_view to_string(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::kTilt45: return "tilt45";
    case AugmentationKind::kScaleTo350x450: return "scale350x450";
    case AugmentationKind::kContrastUp: return "contrast";
    case AugmentationKind::kCenterCrop: return "crop";
  }
  return "unknown";
}

AugmentationKind parse_augmentation_kind(std::string_view text) {
  for (auto kind : kAllAugmentations) {
    if (to_string(kind) == text) return kind;
  }
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lowered.find("flip") != std::string::npos || lowered.find("mirror") != std::string::npos) {
    throw Error(ErrorKind::kInvalidConfig,
                "augmentation '" + std::string(text) +
                    "' is not supported: flipping a chest film moves the heart to the wrong side and produces an "
                    "anatomically invalid image");
  }
  throw Error(ErrorKind::kInvalidConfig,
              "unknown augmentation '" + std::string(text) + "' (expected tilt45, scale350x450, contrast, crop)");
}

void AugmentationOp::validate() const {
  if (!(contrast_factor > 0.0) || !std::isfinite(contrast_factor)) {
    throw Error(ErrorKind::kInvalidArgument, "contrast factor must be positive");
  }
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "crop fraction must lie in (0, 1]");
  }
}

RasterImage rotate(const RasterImage& img, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  RasterImage out(img.width(), img.height(), img.channels(), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cx + cs * dx - sn * dy;
      const double sy = cy + sn * dx + cs * dy;
      if (sx < 0.0 || sy < 0.0 || sx > img.width() - 1 || sy > img.height() - 1) continue;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const int y1 = std::min(y0 + 1, img.height() - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = clamp_to_byte((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

RasterImage adjust_contrast(const RasterImage& img, double factor) {
  RasterImage out = img;
  const std::size_t pixels = static_cast<std::size_t>(img.width()) * img.height();
  for (int c = 0; c < img.channels(); ++c) {
    double sum = 0.0;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) sum += img.at(x, y, c);
    }
    const double mean = sum / static_cast<double>(pixels);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double v = img.at(x, y, c);
        out.at(x, y, c) = factor == 1.0 ? img.at(x, y, c) : clamp_to_byte(mean + factor * (v - mean));
      }
    }
  }
  return out;
}

RasterImage center_crop(const RasterImage& img, double fraction) {
  const int cw = std::max(1, static_cast<int>(std::lround(fraction * img.width())));
  const int ch = std::max(1, static_cast<int>(std::lround(fraction * img.height())));
  const int x0 = (img.width() - cw) / 2;
  const int y0 = (img.height() - ch) / 2;
  RasterImage crop(cw, ch, img.channels());
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      for (int c = 0; c < img.channels(); ++c) crop.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    }
  }
  return resize(crop, img.width(), img.height());
}

LabeledImage apply_augmentation(const LabeledImage& img, const AugmentationOp& op) {
  op.validate();
  LabeledImage out;
  switch (op.kind) {
    case AugmentationKind::kTilt45: out.image = rotate(img.image, 45.0); break;
    case AugmentationKind::kScaleTo350x450: out.image = resize(img.image, 350, 450); break;
    case AugmentationKind::kContrastUp: out.image = adjust_contrast(img.image, op.contrast_factor); break;
    case AugmentationKind::kCenterCrop: out.image = center_crop(img.image, op.crop_fraction); break;
  }
  out.label = img.label;
  out.augmented = true;
  out.origin_id = img.augmented ? img.origin_id : img.source_id;
  out.source_id = img.source_id + "#" + std::string(to_string(op.kind));
  return out;
}

void SweepConfig::validate() const {
  if (step <= 0 || total <= 0 || per_op_per_class <= 0) {
    throw Error(ErrorKind::kInvalidConfig, "sweep step, total and per_op_per_class must be positive");
  }
  if (total % step != 0) {
    throw Error(ErrorKind::kInvalidConfig,
                "sweep total " + std::to_string(total) + " is not divisible by step " + std::to_string(step));
  }
  if (per_op_per_class * 4 * 2 != total) {
    throw Error(ErrorKind::kInvalidConfig, "sweep total must equal per_op_per_class x 4 ops x 2 classes");
  }
  AugmentationOp{AugmentationKind::kContrastUp, contrast_factor, crop_fraction}.validate();
}

std::vector<AugmentationOp> SweepConfig::ops() const {
  std::vector<AugmentationOp> out;
  for (auto kind : kAllAugmentations) out.push_back({kind, contrast_factor, crop_fraction});
  return out;
}

std::vector<LabeledImage> generate_augmented_set(const std::vector<LabeledImage>& pool, const SweepConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<const LabeledImage*>> by_class(2);
  for (const auto& img : pool) {
    if (!img.augmented) by_class[class_index(img.label)].push_back(&img);
  }
  for (auto label : kAllLabels) {
    auto& members = by_class[class_index(label)];
    if (static_cast<int>(members.size()) < cfg.per_op_per_class) {
      throw Error(ErrorKind::kInvalidData, "augmentation pool has " + std::to_string(members.size()) + " " +
                                               std::string(to_string(label)) + " images, need " +
                                               std::to_string(cfg.per_op_per_class));
    }
    std::sort(members.begin(), members.end(),
              [](const LabeledImage* a, const LabeledImage* b) { return a->source_id < b->source_id; });
  }

  nn::Rng rng(cfg.seed);
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(cfg.total));
  for (const auto& op : cfg.ops()) {
    for (auto label : kAllLabels) {
      auto candidates = by_class[class_index(label)];
      std::shuffle(candidates.begin(), candidates.end(), rng);
      for (int i = 0; i < cfg.per_op_per_class; ++i) out.push_back(apply_augmentation(*candidates[i], op));
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::string format_sweep_row(const SweepRow& row) {
  return fmt::format("{},{},{:.6f},{:.6f},{:.6f}", row.model, row.augmented_count, row.augmented_fraction,
                     row.train_accuracy, row.test_accuracy);
}

std::string SweepResult::to_csv() const {
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const auto& row : rows) {
    out += format_sweep_row(row);
    out += '\n';
  }
  return out;
}

void assert_no_leak(const std::vector<LabeledImage>& test, const std::vector<LabeledImage>& augmented) {
  std::unordered_set<std::string> test_ids;
  for (const auto& img : test) {
    if (img.augmented) throw Error(ErrorKind::kDataLeak, "test split contains augmented image " + img.source_id);
    test_ids.insert(img.source_id);
  }
  for (const auto& img : augmented) {
    const std::string& origin = img.augmented ? img.origin_id : img.source_id;
    if (test_ids.count(origin) != 0) {
      throw Error(ErrorKind::kDataLeak, "augmented image " + img.source_id + " derives from test image " + origin);
    }
  }
}

namespace {

std::vector<LabeledImage> fit(const std::vector<LabeledImage>& set, int size) {
  std::vector<LabeledImage> out = set;
  for (auto& img : out) img.image = resize(img.image, size, size);
  return out;
}

}  // namespace

SweepRow run_experiment(const ArchitectureSpec& spec, const DatasetSplits& splits,
                        const std::vector<LabeledImage>& extra, const TrainConfig& train_cfg) {
  std::vector<LabeledImage> train = fit(splits.train, spec.input_size);
  const auto extra_fit = fit(extra, spec.input_size);
  train.insert(train.end(), extra_fit.begin(), extra_fit.end());
  const auto val = fit(splits.val, spec.input_size);
  const auto test = fit(splits.test, spec.input_size);

  TrainedClassifier model = train_classifier(build_classifier(spec), train, val, train_cfg);
  SweepRow row;
  row.model = std::string(to_string(spec.name));
  row.augmented_count = static_cast<int>(extra.size());
  row.augmented_fraction = static_cast<double>(extra.size()) / static_cast<double>(train.size());
  row.train_accuracy = model.history().empty() ? accuracy_on(model, train) : model.history().back().train_accuracy;
  row.test_accuracy = accuracy_on(model, test);
  return row;
}

SweepResult run_sweep(const DatasetSplits& splits, const std::vector<LabeledImage>& augmented_pool,
                      const std::vector<ArchitectureSpec>& archs, const TrainConfig& train_cfg,
                      const SweepConfig& sweep_cfg) {
  sweep_cfg.validate();
  assert_no_leak(splits.test, augmented_pool);
  if (static_cast<int>(augmented_pool.size()) < sweep_cfg.total) {
    throw Error(ErrorKind::kInvalidData, "augmented pool holds " + std::to_string(augmented_pool.size()) +
                                             " images, sweep needs " + std::to_string(sweep_cfg.total));
  }
  SweepResult result;
  for (const auto& spec : archs) {
    for (int k = 0; k <= sweep_cfg.total; k += sweep_cfg.step) {
      const std::vector<LabeledImage> extra(augmented_pool.begin(), augmented_pool.begin() + k);
      result.rows.push_back(run_experiment(spec, splits, extra, train_cfg));
    }
  }
  return result;
}

}  // namespace lungscope
