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

#include "lungscope/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "lungscope/errors.hpp"
#include "lungscope/nn/checkpoint.hpp"
#include "lungscope/nn/optim.hpp"

namespace lungscope {

namespace {

nn::Sequential build_head(const ArchitectureSpec& spec, int feature_channels, nn::Rng& rng) {
  nn::Sequential head;
  head.add<nn::GlobalAvgPool>();
  if (spec.name == Architecture::kAlexNet) {
    const int hidden = std::max(2, static_cast<int>(std::lround(64 * spec.width)));
    head.add<nn::Linear>(feature_channels, hidden, rng);
    head.add<nn::ReLU>();
    head.add<nn::Linear>(hidden, 2, rng);
  } else {
    head.add<nn::Linear>(feature_channels, 2, rng);
  }
  return head;
}

nlohmann::json spec_to_json(const ArchitectureSpec& spec) {
  return {{"name", to_string(spec.name)}, {"input_size", spec.input_size}, {"pretrained", spec.pretrained},
          {"width", spec.width}, {"seed", spec.seed}};
}

ArchitectureSpec spec_from_json(const nlohmann::json& j) {
  ArchitectureSpec spec = ArchitectureSpec::of(parse_architecture(j.at("name").get<std::string>()));
  spec.input_size = j.at("input_size").get<int>();
  spec.pretrained = j.value("pretrained", false);
  spec.width = j.at("width").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

// Softmax cross-entropy on two scores; writes dL/dscore.
double cross_entropy(const std::array<double, 2>& scores, int target, std::array<double, 2>& grad) {
  const double m = std::max(scores[0], scores[1]);
  const double e0 = std::exp(scores[0] - m);
  const double e1 = std::exp(scores[1] - m);
  const double sum = e0 + e1;
  grad = {e0 / sum, e1 / sum};
  const double loss = -((scores[target] - m) - std::log(sum));
  grad[target] -= 1.0;
  return loss;
}

}  // namespace

Prediction prediction_from_scores(double covid_score, double normal_score) {
  Prediction p;
  p.scores = {covid_score, normal_score};
  const double m = std::max(covid_score, normal_score);
  const double e0 = std::exp(covid_score - m);
  const double e1 = std::exp(normal_score - m);
  p.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
  p.label = p.probabilities[0] >= p.probabilities[1] ? ClassLabel::kCovid : ClassLabel::kNormal;
  return p;
}

void TrainConfig::validate() const {
  if (batch_size <= 0) throw Error(ErrorKind::kInvalidConfig, "batch_size must be positive");
  if (epochs < 0) throw Error(ErrorKind::kInvalidConfig, "epochs must be nonnegative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::kInvalidConfig, "learning_rate must be positive");
  }
}

TrainedClassifier::TrainedClassifier(ArchitectureSpec spec, Backbone backbone, nn::Sequential head)
    : spec_(spec),
      input_size_(spec.input_size),
      stats_(NormalizationStats::imagenet()),
      features_(std::make_unique<nn::Sequential>(std::move(backbone.features))),
      head_(std::make_unique<nn::Sequential>(std::move(head))) {}

TrainedClassifier TrainedClassifier::custom(nn::Sequential features, nn::Sequential head, int input_size,
                                            NormalizationStats stats) {
  if (input_size <= 0) throw Error(ErrorKind::kInvalidModel, "custom network needs a positive input size");
  if (features.empty() || head.empty()) throw Error(ErrorKind::kInvalidModel, "custom network has an empty stage");
  TrainedClassifier model;
  model.input_size_ = input_size;
  model.stats_ = std::move(stats);
  model.features_ = std::make_unique<nn::Sequential>(std::move(features));
  model.head_ = std::make_unique<nn::Sequential>(std::move(head));
  model.ready_ = true;
  return model;
}

std::string TrainedClassifier::name() const {
  return spec_ ? std::string(to_string(spec_->name)) : std::string("custom");
}

std::vector<nn::Parameter*> TrainedClassifier::parameters() {
  std::vector<nn::Parameter*> params;
  features_->collect_parameters(params);
  head_->collect_parameters(params);
  return params;
}

nn::Tensor TrainedClassifier::to_input(const RasterImage& img) const {
  if (img.width() != input_size_ || img.height() != input_size_) {
    throw Error(ErrorKind::kInvalidInput, name() + " expects " + std::to_string(input_size_) + "x" +
                                              std::to_string(input_size_) + " input, got " +
                                              std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  const RealGrid grid = normalize_for_model(img, stats_);
  nn::Tensor t(1, grid.channels, grid.height, grid.width);
  std::copy(grid.values.begin(), grid.values.end(), t.data());
  return t;
}

std::array<double, 2> TrainedClassifier::scores(const nn::Tensor& input) {
  const nn::Tensor out = head_->forward(features_->forward(input));
  if (out.size() != 2) {
    throw Error(ErrorKind::kInvalidModel, "classifier head emits " + std::to_string(out.size()) + " scores, expected 2");
  }
  return {out[0], out[1]};
}

void TrainedClassifier::save(const std::filesystem::path& path) {
  if (!spec_) throw Error(ErrorKind::kInvalidModel, "custom networks cannot be checkpointed");
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : history_) {
    history.push_back({{"train_loss", e.train_loss},
                       {"train_accuracy", e.train_accuracy},
                       {"val_loss", e.val_loss},
                       {"val_accuracy", e.val_accuracy}});
  }
  const nlohmann::json header = {{"kind", "classifier"},
                                 {"architecture", spec_to_json(*spec_)},
                                 {"normalization", {{"mean", stats_.mean}, {"std", stats_.std}}},
                                 {"history", history}};
  nn::write_checkpoint(path, header, parameters());
}

TrainedClassifier TrainedClassifier::load(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  if (ckpt.header.value("kind", "") != "classifier") {
    throw Error(ErrorKind::kInvalidModel, path.string() + " is not a classifier checkpoint");
  }
  try {
    ArchitectureSpec spec = spec_from_json(ckpt.header.at("architecture"));
    ArchitectureSpec build_spec = spec;
    build_spec.pretrained = false;
    TrainedClassifier model = build_classifier(build_spec);
    model.spec_ = spec;
    model.stats_.mean = ckpt.header.at("normalization").at("mean").get<std::vector<double>>();
    model.stats_.std = ckpt.header.at("normalization").at("std").get<std::vector<double>>();
    for (const auto& e : ckpt.header.at("history")) {
      model.history_.push_back({e.at("train_loss").get<double>(), e.at("train_accuracy").get<double>(),
                                e.at("val_loss").get<double>(), e.at("val_accuracy").get<double>()});
    }
    nn::load_parameters(ckpt, model.parameters());
    model.ready_ = true;
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidModel, "malformed classifier header: " + std::string(e.what()));
  }
}

TrainedClassifier build_classifier(const ArchitectureSpec& spec) {
  spec.validate();
  nn::Rng rng(spec.seed);
  Backbone backbone = build_backbone(spec, rng);
  if (spec.pretrained) {
    if (spec.pretrained_weights.empty() || !std::filesystem::exists(spec.pretrained_weights)) {
      throw Error(ErrorKind::kResource,
                  "pretrained weights for " + std::string(to_string(spec.name)) +
                      " are not available; set pretrained_weights to a classifier checkpoint of the same architecture");
    }
    const nn::Checkpoint ckpt = nn::read_checkpoint(spec.pretrained_weights);
    const auto& arch = ckpt.header.at("architecture");
    if (arch.at("name").get<std::string>() != to_string(spec.name) || arch.at("width").get<double>() != spec.width) {
      throw Error(ErrorKind::kInvalidModel, "pretrained checkpoint architecture does not match the requested backbone");
    }
    std::vector<nn::Parameter*> params;
    backbone.features.collect_parameters(params);
    if (ckpt.tensors.size() < params.size()) {
      throw Error(ErrorKind::kInvalidModel, "pretrained checkpoint has too few tensors");
    }
    nn::Checkpoint trimmed;
    trimmed.tensors.assign(ckpt.tensors.begin(), ckpt.tensors.begin() + static_cast<std::ptrdiff_t>(params.size()));
    nn::load_parameters(trimmed, params);
  }
  const int channels = backbone.feature_channels;
  nn::Sequential head = build_head(spec, channels, rng);
  TrainedClassifier model(spec, std::move(backbone), std::move(head));
  if (spec.pretrained) model.mark_ready();
  return model;
}

TrainedClassifier train_classifier(TrainedClassifier model, const std::vector<LabeledImage>& train_set,
                                   const std::vector<LabeledImage>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorKind::kInvalidData, "training split is empty");
  if (val_set.empty()) throw Error(ErrorKind::kInvalidData, "validation split is empty");
  if (cfg.epochs == 0) return model;

  auto params = model.parameters();
  nn::zero_grad(params);
  nn::Adam adam(params, {.learning_rate = cfg.learning_rate});
  nn::Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < stop; ++i) {
        const LabeledImage& sample = train_set[order[i]];
        const nn::Tensor input = model.to_input(sample.image);
        const nn::Tensor features = model.features().forward(input);
        const nn::Tensor out = model.head().forward(features);
        const std::array<double, 2> s{out[0], out[1]};
        std::array<double, 2> g{};
        const int target = class_index(sample.label);
        const double loss = cross_entropy(s, target, g);
        if (!std::isfinite(loss)) {
          throw Error(ErrorKind::kDivergence, "non-finite training loss in epoch " + std::to_string(epoch + 1));
        }
        loss_sum += loss;
        if (prediction_from_scores(s[0], s[1]).label == sample.label) ++correct;
        nn::Tensor grad = nn::Tensor::like(out);
        grad[0] = g[0];
        grad[1] = g[1];
        model.features().backward(model.head().backward(grad));
      }
      adam.step(1.0 / static_cast<double>(stop - start));
    }

    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    double val_loss = 0.0;
    std::size_t val_correct = 0;
    for (const auto& sample : val_set) {
      const auto s = model.scores(model.to_input(sample.image));
      std::array<double, 2> g{};
      val_loss += cross_entropy(s, class_index(sample.label), g);
      if (prediction_from_scores(s[0], s[1]).label == sample.label) ++val_correct;
    }
    rec.val_loss = val_loss / static_cast<double>(val_set.size());
    rec.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(val_set.size());
    if (!std::isfinite(rec.val_loss)) {
      throw Error(ErrorKind::kDivergence, "non-finite validation loss in epoch " + std::to_string(epoch + 1));
    }
    model.history().push_back(rec);
  }
  model.mark_ready();
  return model;
}

Prediction predict(TrainedClassifier& model, const RasterImage& img) {
  const auto s = model.scores(model.to_input(img));
  return prediction_from_scores(s[0], s[1]);
}

std::vector<Prediction> predict_batch(TrainedClassifier& model, const std::vector<RasterImage>& imgs) {
  std::vector<Prediction> out;
  out.reserve(imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    try {
      out.push_back(predict(model, imgs[i]));
    } catch (const Error& e) {
      throw Error(e.kind(), "image " + std::to_string(i) + ": " + e.detail());
    }
  }
  return out;
}

double accuracy_on(TrainedClassifier& model, const std::vector<LabeledImage>& set) {
  if (set.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : set) {
    if (predict(model, s.image).label == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

}  // namespace lungscope
