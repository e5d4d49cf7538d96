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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lungscope/image.hpp"
#include "lungscope/nn/layers.hpp"

namespace lungscope {

enum class Architecture { kAlexNet, kResNet50, kInceptionV3, kSqueezeNet };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view text);
/// Canonical input resolution per architecture (square).
int canonical_input_size(Architecture arch);

struct ArchitectureSpec {
  Architecture name = Architecture::kSqueezeNet;
  int input_size = 224;
  bool pretrained = false;
  /// Backbone checkpoint consulted when `pretrained` is set.
  std::filesystem::path pretrained_weights;
  /// Channel multiplier applied to every layer of the backbone.
  double width = 1.0;
  /// Seeds backbone and head initialisation.
  std::uint64_t seed = 0;

  static ArchitectureSpec of(Architecture arch, std::uint64_t seed = 0, double width = 1.0);
  void validate() const;
};

struct Backbone {
  nn::Sequential features;
  int feature_channels = 0;
};

/// Feature extractor up to and including the final convolutional block.
Backbone build_backbone(const ArchitectureSpec& spec, nn::Rng& rng);

struct TrainConfig {
  int batch_size = 32;
  int epochs = 30;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct Prediction {
  ClassLabel label = ClassLabel::kCovid;
  /// Indexed by class_index(): {p_covid, p_normal}.
  std::array<double, 2> probabilities{0.5, 0.5};
  std::array<double, 2> scores{0.0, 0.0};

  bool operator==(const Prediction&) const = default;
};

/// Two-way softmax; ties go to covid.
Prediction prediction_from_scores(double covid_score, double normal_score);

/// A backbone + 2-class head, its training history and input contract.
class TrainedClassifier {
 public:
  TrainedClassifier(ArchitectureSpec spec, Backbone backbone, nn::Sequential head);
  /// Hand-built network (tests, analytic fixtures). Counts as ready for
  /// inference and explanation; cannot be checkpointed.
  static TrainedClassifier custom(nn::Sequential features, nn::Sequential head, int input_size,
                                  NormalizationStats stats);

  TrainedClassifier(TrainedClassifier&&) = default;
  TrainedClassifier& operator=(TrainedClassifier&&) = default;

  const std::optional<ArchitectureSpec>& spec() const noexcept { return spec_; }
  std::string name() const;
  int input_size() const noexcept { return input_size_; }
  const NormalizationStats& normalization() const noexcept { return stats_; }
  const std::vector<EpochRecord>& history() const noexcept { return history_; }
  std::vector<EpochRecord>& history() noexcept { return history_; }
  bool ready() const noexcept { return ready_; }
  void mark_ready() noexcept { ready_ = true; }

  nn::Sequential& features() { return *features_; }
  nn::Sequential& head() { return *head_; }
  std::vector<nn::Parameter*> parameters();

  /// Image -> normalised (1, C, S, S) tensor; throws kInvalidInput on a
  /// size mismatch.
  nn::Tensor to_input(const RasterImage& img) const;
  /// Head scores for one input tensor.
  std::array<double, 2> scores(const nn::Tensor& input);

  void save(const std::filesystem::path& path);
  static TrainedClassifier load(const std::filesystem::path& path);

 private:
  TrainedClassifier() = default;

  std::optional<ArchitectureSpec> spec_;
  int input_size_ = 0;
  NormalizationStats stats_;
  std::unique_ptr<nn::Sequential> features_;
  std::unique_ptr<nn::Sequential> head_;
  std::vector<EpochRecord> history_;
  bool ready_ = false;
};

TrainedClassifier build_classifier(const ArchitectureSpec& spec);

TrainedClassifier train_classifier(TrainedClassifier model, const std::vector<LabeledImage>& train_set,
                                   const std::vector<LabeledImage>& val_set, const TrainConfig& cfg);

Prediction predict(TrainedClassifier& model, const RasterImage& img);
std::vector<Prediction> predict_batch(TrainedClassifier& model, const std::vector<RasterImage>& imgs);

/// Fraction of correctly classified images.
double accuracy_on(TrainedClassifier& model, const std::vector<LabeledImage>& set);

}  // namespace lungscope
