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
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "lungscope/image.hpp"

namespace lungscope {

/// Counts with covid as the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Each metric is empty when its denominator is zero.
struct MetricsReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> npv;
  std::optional<double> fnr;
  std::optional<double> fdr;
  std::optional<double> fpr;
  std::optional<double> accuracy;
  std::optional<double> f1;
};

ConfusionMatrix confusion_from_predictions(std::span<const ClassLabel> truths, std::span<const ClassLabel> preds);

MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// Metrics rounded to 4 decimals (undefined ones as null) plus the raw
/// counts.
nlohmann::json metrics_to_json(const ConfusionMatrix& cm, const MetricsReport& report);

/// Round half away from zero at `decimals` places.
double round_to(double value, int decimals);

}  // namespace lungscope
