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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lungscope/errors.hpp"
#include "lungscope/evaluation.hpp"

using namespace lungscope;

namespace {

constexpr ClassLabel C = ClassLabel::kCovid;
constexpr ClassLabel N = ClassLabel::kNormal;

long double ratio(std::int64_t a, std::int64_t b) { return static_cast<long double>(a) / static_cast<long double>(b); }

void check_close(const std::optional<double>& got, long double expect) {
  REQUIRE(got.has_value());
  CHECK(std::abs(static_cast<long double>(*got) - expect) <= 1e-12L);
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("confusion counting") {
  const std::vector<ClassLabel> one{C};
  CHECK(confusion_from_predictions(one, one) == ConfusionMatrix{1, 0, 0, 0});
  const std::vector<ClassLabel> t{N}, p{C};
  CHECK(confusion_from_predictions(t, p) == ConfusionMatrix{0, 1, 0, 0});
  const std::vector<ClassLabel> t2{C, N, N, C}, p2{N, N, C, C};
  CHECK(confusion_from_predictions(t2, p2) == ConfusionMatrix{1, 1, 1, 1});

  try {
    confusion_from_predictions(t2, p);
    FAIL("expected invalid data");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidData);
  }
  CHECK_THROWS_AS(confusion_from_predictions({}, {}), Error);
}

TEST_CASE("confusion matches a brute force counter and is permutation invariant") {
  std::mt19937_64 rng(1);
  std::vector<ClassLabel> truths(1000), preds(1000);
  for (int i = 0; i < 1000; ++i) {
    truths[i] = rng() & 1 ? C : N;
    preds[i] = rng() & 1 ? C : N;
  }
  ConfusionMatrix brute;
  for (int i = 0; i < 1000; ++i) {
    if (truths[i] == C && preds[i] == C) ++brute.tp;
    if (truths[i] == N && preds[i] == N) ++brute.tn;
    if (truths[i] == N && preds[i] == C) ++brute.fp;
    if (truths[i] == C && preds[i] == N) ++brute.fn;
  }
  const ConfusionMatrix cm = confusion_from_predictions(truths, preds);
  CHECK(cm == brute);
  CHECK(cm.total() == 1000);

  std::vector<int> order(1000);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ClassLabel> t2, p2;
  for (int i : order) {
    t2.push_back(truths[i]);
    p2.push_back(preds[i]);
  }
  CHECK(confusion_from_predictions(t2, p2) == cm);
}

TEST_CASE("reported test-split matrix") {
  const MetricsReport r = compute_metrics({417, 21, 399, 23});
  CHECK(std::abs(*r.sensitivity - 0.9477) <= 1e-4);
  CHECK(std::abs(*r.specificity - 0.9500) <= 1e-4);
  CHECK(std::abs(*r.precision - 0.9521) <= 1e-4);
  CHECK(std::abs(*r.npv - 0.9455) <= 1e-4);
  CHECK(std::abs(*r.fnr - 0.0523) <= 1e-4);
  CHECK(std::abs(*r.fdr - 0.0479) <= 1e-4);
  CHECK(std::abs(*r.fpr - 0.0500) <= 1e-4);
  CHECK(std::abs(*r.accuracy - 0.9488) <= 1e-4);
  CHECK(std::abs(*r.f1 - 0.9499) <= 1e-4);
}

TEST_CASE("degenerate matrices") {
  const MetricsReport perfect = compute_metrics({1, 0, 1, 0});
  for (const auto* m : {&perfect.sensitivity, &perfect.specificity, &perfect.precision, &perfect.npv,
                        &perfect.accuracy, &perfect.f1}) {
    REQUIRE(m->has_value());
    CHECK(**m == 1.0);
  }
  CHECK(*perfect.fnr == 0.0);

  const MetricsReport neg = compute_metrics({0, 0, 5, 0});
  CHECK(*neg.specificity == 1.0);
  CHECK(*neg.accuracy == 1.0);
  CHECK_FALSE(neg.sensitivity.has_value());
  CHECK_FALSE(neg.precision.has_value());
  CHECK_FALSE(neg.fnr.has_value());
  CHECK_FALSE(neg.fdr.has_value());
  CHECK_FALSE(neg.f1.has_value());

  try {
    compute_metrics({0, 0, 0, 0});
    FAIL("expected invalid data");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidData);
  }
}

TEST_CASE("metric identities on random matrices") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t cap = i % 2 ? 1000000 : 20;
    std::uniform_int_distribution<std::int64_t> d(0, cap);
    ConfusionMatrix cm{d(rng), d(rng), d(rng), d(rng)};
    if (cm.total() == 0) continue;
    const MetricsReport r = compute_metrics(cm);
    if (r.sensitivity) {
      CHECK(*r.fnr == 1.0 - *r.sensitivity);
      check_close(r.sensitivity, ratio(cm.tp, cm.tp + cm.fn));
      check_close(r.fnr, ratio(cm.fn, cm.tp + cm.fn));
    }
    if (r.specificity) {
      CHECK(*r.fpr == 1.0 - *r.specificity);
      check_close(r.specificity, ratio(cm.tn, cm.tn + cm.fp));
      check_close(r.fpr, ratio(cm.fp, cm.tn + cm.fp));
    }
    if (r.precision) {
      CHECK(*r.fdr == 1.0 - *r.precision);
      check_close(r.precision, ratio(cm.tp, cm.tp + cm.fp));
      check_close(r.fdr, ratio(cm.fp, cm.tp + cm.fp));
    }
    if (r.npv) check_close(r.npv, ratio(cm.tn, cm.tn + cm.fn));
    check_close(r.accuracy, ratio(cm.tp + cm.tn, cm.total()));
    if (r.f1) {
      check_close(r.f1, ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn));
      if (r.precision && r.sensitivity && *r.precision + *r.sensitivity > 0) {
        const double hm = 2 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
        CHECK(std::abs(hm - *r.f1) <= 1e-12);
      }
    }
    if (r.sensitivity && r.specificity) {
      CHECK(*r.accuracy >= std::min(*r.sensitivity, *r.specificity) - 1e-15);
      CHECK(*r.accuracy <= std::max(*r.sensitivity, *r.specificity) + 1e-15);
    }
  }
}

TEST_CASE("json serialisation") {
  const auto j = metrics_to_json({417, 21, 399, 23}, compute_metrics({417, 21, 399, 23}));
  CHECK(j["confusion"]["tp"] == 417);
  CHECK(j["confusion"]["fn"] == 23);
  CHECK(j["sensitivity"].get<double>() == 0.9477);
  CHECK(j["f1"].get<double>() == 0.9499);
  const auto k = metrics_to_json({0, 0, 5, 0}, compute_metrics({0, 0, 5, 0}));
  CHECK(k["precision"].is_null());
  CHECK(k["specificity"].get<double>() == 1.0);
}

TEST_CASE("rounding") {
  CHECK(round_to(0.94765, 4) == 0.9477);
  CHECK(round_to(0.12344, 4) == 0.1234);
  CHECK(round_to(-0.00005, 4) == -0.0001);
  CHECK(round_to(2.5, 0) == 3.0);
}

}  // TEST_SUITE
