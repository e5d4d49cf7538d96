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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lungscope/enhancement.hpp"
#include "lungscope/image.hpp"
#include "lungscope/segmentation.hpp"

namespace lungscope {

struct ManifestEntry {
  std::filesystem::path path;
  ClassLabel label = ClassLabel::kNormal;
  /// Path relative to the dataset root, '/'-separated.
  std::string source_id;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  /// Files under the class directories that could not be decoded.
  std::vector<std::string> skipped;

  std::size_t count(ClassLabel label) const;
};

/// Enumerates `root/covid` and `root/normal` recursively in lexicographic
/// order. Missing class directories are a layout error; undecodable files
/// are skipped and recorded.
DatasetManifest load_manifest(const std::filesystem::path& root);

/// Seeded sampling without replacement per class; positives first.
DatasetManifest balanced_sample(const DatasetManifest& manifest, std::size_t n_pos, std::size_t n_neg,
                                std::uint64_t seed);

void write_manifest_csv(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest_csv(const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.65;
  double val = 0.15;
  double test = 0.20;

  void validate() const;
};

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Stratified seeded split. Global sizes are floor(r * N) for train and val
/// with the remainder in test; each class receives its share by largest
/// remainder.
SplitAssignment split_dataset(const DatasetManifest& manifest, const SplitRatios& ratios, std::uint64_t seed);

nlohmann::json splits_to_json(const SplitAssignment& splits);
SplitAssignment splits_from_json(const nlohmann::json& j);

struct PreprocessOptions {
  EnhancementConfig enhancement;
  /// Null disables segmentation. Inference mutates layer caches, so the
  /// model is only used from one thread.
  SegmentationModel* segmentation = nullptr;
  BinarizeOptions binarize;
  /// Square output size; 0 keeps the source dimensions.
  int output_size = 0;
  /// Content-addressed cache of finished images; empty disables caching.
  std::filesystem::path cache_dir;
  double max_failure_rate = 0.05;
};

struct PreprocessResult {
  std::vector<LabeledImage> images;
  /// Masks at the output resolution, parallel to `images`; empty when
  /// segmentation is disabled.
  std::vector<LungMask> masks;
  /// "source_id: reason" for every excluded image.
  std::vector<std::string> failures;
};

struct PreprocessedImage {
  RasterImage image;
  std::optional<LungMask> mask;
};

/// gray -> enhance -> (mask + apply_mask) -> resize for one decoded image.
PreprocessedImage preprocess_image(const RasterImage& img, const PreprocessOptions& options);

/// Runs preprocess_image over the manifest in manifest order. Decoding and
/// filtering fan out over threads. Aborts with an invalid-data error when
/// more than max_failure_rate of the images fail.
PreprocessResult preprocess_all(const DatasetManifest& manifest, const PreprocessOptions& options);

/// Cache directory from LUNGSCOPE_CACHE_DIR, or empty.
std::filesystem::path cache_dir_from_env();

/// Writes every image as PNG under `out_dir`, mirroring source ids.
void write_preprocessed(const std::filesystem::path& out_dir, const PreprocessResult& result);

/// png path for a source id under `dir` (extension replaced by .png).
std::filesystem::path mirrored_png(const std::filesystem::path& dir, const std::string& source_id);

}  // namespace lungscope
