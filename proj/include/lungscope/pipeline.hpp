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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lungscope/augmentation.hpp"
#include "lungscope/classifier.hpp"
#include "lungscope/dataset.hpp"
#include "lungscope/enhancement.hpp"
#include "lungscope/errors.hpp"
#include "lungscope/evaluation.hpp"

namespace lungscope {

struct SampleCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Everything one end-to-end run needs. Loaded from a JSON config file; CLI
/// flags override individual fields.
struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path data;
  std::filesystem::path output;
  /// Balanced subsample of the dataset; absent means use every image.
  std::optional<SampleCounts> sample;
  SplitRatios split;
  EnhancementConfig enhancement;
  bool segmentation = true;
  std::filesystem::path segmentation_weights;
  BinarizeOptions binarize;
  std::vector<Architecture> architectures{Architecture::kSqueezeNet};
  double width = 1.0;
  bool pretrained = false;
  /// Directory of `<arch>.ckpt` backbones used when `pretrained` is set.
  std::filesystem::path pretrained_dir;
  TrainConfig train;
  bool explain = false;
  double overlay_alpha = 0.5;
  std::optional<SweepConfig> sweep;

  /// Throws kInvalidConfig listing every offending field.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  /// Field-level checks, including that referenced paths exist.
  void validate() const;

  ArchitectureSpec spec_for(Architecture arch) const;
};

/// Canonical hash of the config (fnv1a64 over the sorted-key JSON dump).
std::string config_hash(const PipelineConfig& cfg);

struct ModelOutcome {
  std::string model;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  /// Over every explained test image.
  std::optional<double> mean_out_of_mask_relevance;
  /// Over test images predicted covid.
  std::optional<double> mean_positive_out_of_mask_relevance;
};

struct RunSummary {
  std::filesystem::path directory;
  std::vector<ModelOutcome> models;
};

/// load -> sample -> preprocess -> split -> train -> predict -> evaluate,
/// writing every artifact under cfg.output.
RunSummary run_pipeline(const PipelineConfig& cfg);

/// Segmented and unsegmented runs side by side under cfg.output, plus a
/// comparison figure and table.
std::pair<RunSummary, RunSummary> run_comparison(const PipelineConfig& cfg);

/// The augmentation sweep; writes sweep.csv (and run_manifest.json) under
/// cfg.output. Requires cfg.sweep.
SweepResult run_sweep_pipeline(const PipelineConfig& cfg);

/// Loaded, preprocessed and split dataset at native resolution.
struct PreparedData {
  DatasetManifest manifest;
  SplitAssignment assignment;
  DatasetSplits splits;
  /// Masks by source id (segmented runs only).
  std::map<std::string, LungMask> masks;
  std::vector<std::string> failures;
};

PreparedData prepare_data(const PipelineConfig& cfg);

struct PredictionRecord {
  std::string source_id;
  std::optional<ClassLabel> truth;
  Prediction prediction;
};

std::string predictions_csv(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path);

/// Process exit status for a failure category: 2 config, 3 data leak,
/// 4 divergence, 1 anything else.
int exit_code_for(ErrorKind kind);

/// Writes a text file, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Image files under `dir` (recursive, lexicographic by relative path).
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace lungscope
