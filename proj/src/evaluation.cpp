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

#include "lungscope/evaluation.hpp"

#include <cmath>

#include "lungscope/errors.hpp"

namespace lungscope {

ConfusionMatrix confusion_from_predictions(std::span<const ClassLabel> truths, std::span<const ClassLabel> preds) {
  if (truths.size() != preds.size()) {
    throw Error(ErrorKind::kInvalidData, "got " + std::to_string(truths.size()) + " truths and " +
                                             std::to_string(preds.size()) + " predictions");
  }
  if (truths.empty()) throw Error(ErrorKind::kInvalidData, "no predictions to evaluate");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool truth_pos = truths[i] == ClassLabel::kCovid;
    const bool pred_pos = preds[i] == ClassLabel::kCovid;
    if (truth_pos && pred_pos) {
      ++cm.tp;
    } else if (!truth_pos && !pred_pos) {
      ++cm.tn;
    } else if (!truth_pos && pred_pos) {
      ++cm.fp;
    } else {
      ++cm.fn;
    }
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.tn < 0 || cm.fn < 0) {
    throw Error(ErrorKind::kInvalidData, "confusion counts must be nonnegative");
  }
  if (cm.total() == 0) throw Error(ErrorKind::kInvalidData, "confusion matrix is empty");
  MetricsReport r;
  r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  r.specificity = ratio(cm.tn, cm.fp + cm.tn);
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.npv = ratio(cm.tn, cm.tn + cm.fn);
  // Miss rates as complements, so 1 - rate identities hold bit-exactly.
  auto complement = [](const std::optional<double>& v) { return v ? std::optional<double>(1.0 - *v) : std::nullopt; };
  r.fnr = complement(r.sensitivity);
  r.fdr = complement(r.precision);
  r.fpr = complement(r.specificity);
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  return r;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

nlohmann::json metrics_to_json(const ConfusionMatrix& cm, const MetricsReport& report) {
  auto field = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(round_to(*v, 4)) : nlohmann::json(nullptr);
  };
  return {{"confusion", {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}}},
          {"sensitivity", field(report.sensitivity)},
          {"specificity", field(report.specificity)},
          {"precision", field(report.precision)},
          {"npv", field(report.npv)},
          {"fnr", field(report.fnr)},
          {"fdr", field(report.fdr)},
          {"fpr", field(report.fpr)},
          {"accuracy", field(report.accuracy)},
          {"f1", field(report.f1)}};
}

}  // namespace lungscope
