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

// Acceptance harness: one PASS/FAIL line per criterion.
//   acceptance                 run all criteria
//   acceptance --criterion N   run one
// Exit status is non-zero if any selected criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lungscope/augmentation.hpp"
#include "lungscope/classifier.hpp"
#include "lungscope/enhancement.hpp"
#include "lungscope/evaluation.hpp"
#include "lungscope/explain.hpp"
#include "lungscope/pipeline.hpp"
#include "lungscope/segmentation.hpp"
#include "support/synthetic.hpp"

using namespace lungscope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const NormalizationStats kUnitGray{{0.0}, {1.0}};

RasterImage random_gray(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RasterImage img(size, size, 1);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

// ---------------------------------------------------------------- 1

Outcome criterion_1() {
  const std::array<double, 9> table{0.9477, 0.9500, 0.9521, 0.9455, 0.0523, 0.0479, 0.0500, 0.9488, 0.9499};
  auto values = [](const MetricsReport& r) {
    return std::array<std::optional<double>, 9>{r.sensitivity, r.specificity, r.precision, r.npv, r.fnr,
                                                r.fdr,         r.fpr,         r.accuracy,  r.f1};
  };
  std::vector<ConfusionMatrix> hits;
  for (std::int64_t tp = 0; tp <= 440; ++tp) {
    for (std::int64_t tn = 0; tn <= 420; ++tn) {
      const ConfusionMatrix cm{tp, 420 - tn, tn, 440 - tp};
      const auto v = values(compute_metrics(cm));
      bool match = true;
      for (std::size_t i = 0; i < 9 && match; ++i) match = v[i] && round_to(*v[i], 4) == table[i];
      if (match) hits.push_back(cm);
    }
  }
  const ConfusionMatrix expect{417, 21, 399, 23};
  const auto v = values(compute_metrics(expect));
  double worst = 0.0;
  for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, v[i] ? std::abs(*v[i] - table[i]) : 1.0);
  const bool unique = hits.size() == 1 && hits[0] == expect;
  return {unique && worst <= 1e-4,
          fmt::format("{} matrix(es) over TP+FN=440, TN+FP=420 match to 4 decimals{}; max |error| {:.2e} (tol 1e-4)",
                      hits.size(), unique ? " (TP=417 FP=21 TN=399 FN=23)" : "", worst)};
}

// ---------------------------------------------------------------- 2

Outcome criterion_2() {
  std::mt19937_64 rng(2024);
  int checked = 0, failures = 0;
  double worst_f1 = 0.0;
  while (checked < 5000) {
    const std::int64_t cap = checked % 3 == 0 ? 10 : checked % 3 == 1 ? 1000 : 1000000;
    std::uniform_int_distribution<std::int64_t> d(0, cap);
    const ConfusionMatrix cm{d(rng), d(rng), d(rng), d(rng)};
    if (cm.total() == 0) continue;
    ++checked;
    const MetricsReport r = compute_metrics(cm);
    bool ok = true;
    if (r.sensitivity) ok &= *r.fnr == 1.0 - *r.sensitivity;
    if (r.specificity) ok &= *r.fpr == 1.0 - *r.specificity;
    if (r.precision) ok &= *r.fdr == 1.0 - *r.precision;
    if (r.f1) {
      const double formula = static_cast<double>(2 * cm.tp) / static_cast<double>(2 * cm.tp + cm.fp + cm.fn);
      worst_f1 = std::max(worst_f1, std::abs(*r.f1 - formula));
      ok &= std::abs(*r.f1 - formula) <= 1e-12;
      if (r.precision && r.sensitivity && *r.precision + *r.sensitivity > 0.0) {
        const double hm = 2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
        worst_f1 = std::max(worst_f1, std::abs(*r.f1 - hm));
        ok &= std::abs(*r.f1 - hm) <= 1e-12;
      }
    }
    if (r.sensitivity && r.specificity) {
      ok &= *r.accuracy >= std::min(*r.sensitivity, *r.specificity);
      ok &= *r.accuracy <= std::max(*r.sensitivity, *r.specificity);
    }
    if (!ok) ++failures;
  }
  return {failures == 0, fmt::format("{} random matrices, {} violations; max F1 deviation {:.2e} (tol 1e-12)", checked,
                                     failures, worst_f1)};
}

// ---------------------------------------------------------------- 3, 4

// conv3x3 (1 -> 2) + ReLU -> GAP -> linear; the covid score is mean(A_0).
TrainedClassifier channel_zero_model(int size) {
  nn::Rng rng(3);
  nn::Sequential features;
  features.add<nn::Conv2d>(1, 2, 3, 1, 1, rng);
  features.add<nn::ReLU>();
  nn::Sequential head;
  head.add<nn::GlobalAvgPool>();
  auto& fc = head.add<nn::Linear>(2, 2, rng);
  fc.weight().value.fill(0.0);
  fc.weight().value[0] = 1.0;
  return TrainedClassifier::custom(std::move(features), std::move(head), size, kUnitGray);
}

// Two feature channels feeding a small non-linear head with a softmax.
TrainedClassifier toy_model(std::uint64_t seed, int size) {
  nn::Rng rng(seed);
  nn::Sequential features;
  features.add<nn::Conv2d>(1, 2, 3, 1, 1, rng);
  features.add<nn::ReLU>();
  nn::Sequential head;
  auto& mix = head.add<nn::Conv2d>(2, 3, 1, 1, 0, rng);
  mix.bias().value[0] = 0.3;
  mix.bias().value[1] = -0.2;
  mix.bias().value[2] = 0.1;
  head.add<nn::ReLU>();
  head.add<nn::GlobalAvgPool>();
  head.add<nn::Linear>(3, 2, rng);
  return TrainedClassifier::custom(std::move(features), std::move(head), size, kUnitGray);
}

Outcome criterion_3() {
  double worst_map = 0.0;
  TrainedClassifier m = channel_zero_model(12);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RasterImage img = random_gray(12, s);
    const nn::Tensor a = m.features().forward(m.to_input(img));
    double peak = 0.0;
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) peak = std::max(peak, a.at(0, 0, y, x));
    const Heatmap hm = grad_cam(m, img, ClassLabel::kCovid);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) {
        const double expect = peak > 0.0 ? std::max(0.0, a.at(0, 0, y, x)) / peak : 0.0;
        worst_map = std::max(worst_map, std::abs(hm.at(x, y) - expect));
      }
  }

  double worst_rel = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainedClassifier toy = toy_model(seed, 4);
    const RasterImage img = random_gray(4, seed + 10);
    for (ClassLabel target : kAllLabels) {
      const auto trace = detail::cam_trace(toy, img, target, {});
      const int t = class_index(target);
      auto prob = [&](nn::Tensor a) {
        const nn::Tensor z = toy.head().forward(a);
        return prediction_from_scores(z[0], z[1]).probabilities[t];
      };
      for (int k = 0; k < 2; ++k) {
        double fd_sum = 0.0;
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x) {
            nn::Tensor a = trace.activations;
            const double h = 1e-6;
            a.at(0, k, y, x) += h;
            const double up = prob(a);
            a.at(0, k, y, x) -= 2 * h;
            fd_sum += (up - prob(a)) / (2 * h);
          }
        const double fd = fd_sum / 16.0;
        worst_rel = std::max(worst_rel, std::abs(fd - trace.alphas[k]) / std::max(std::abs(fd), 1e-12));
      }
    }
  }
  return {worst_map <= 1e-5 && worst_rel < 1e-4,
          fmt::format("heatmap vs normalised ReLU(channel 0) max |error| {:.2e} (tol 1e-5); channel weight vs "
                      "central differences max relative error {:.2e} (tol 1e-4)",
                      worst_map, worst_rel)};
}

Outcome criterion_4() {
  TrainedClassifier m = toy_model(21, 8);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RasterImage img = random_gray(8, 100 + s);
    const auto a = detail::cam_trace(m, img, ClassLabel::kCovid, {});
    const auto b = detail::cam_trace(m, img, ClassLabel::kNormal, {});
    for (std::size_t k = 0; k < a.alphas.size(); ++k) worst = std::max(worst, std::abs(a.alphas[k] + b.alphas[k]));
  }
  return {worst <= 1e-6, fmt::format("20 inputs, max |alpha_covid + alpha_normal| {:.2e} (tol 1e-6)", worst)};
}

// ---------------------------------------------------------------- 5

Outcome criterion_5() {
  constexpr int kSize = 32;
  nn::Rng rng(5);
  nn::Sequential features;
  features.add<nn::Conv2d>(1, 8, 3, 1, 1, rng);
  features.add<nn::ReLU>();
  features.add<nn::MaxPool>(nn::PoolGeometry{2, 2, 0});
  features.add<nn::Conv2d>(8, 16, 3, 1, 1, rng);
  features.add<nn::ReLU>();
  nn::Sequential head;
  head.add<nn::GlobalAvgPool>();
  head.add<nn::Linear>(16, 2, rng);
  TrainedClassifier untrained =
      TrainedClassifier::custom(std::move(features), std::move(head), kSize, NormalizationStats{{0.3}, {0.2}});

  std::vector<LabeledImage> train, val;
  for (const auto& s : testing::synthetic_set(20, 50, {kSize, 0.0})) train.push_back({apply_mask(s.image.image, s.mask), s.image.label, s.image.source_id});
  for (const auto& s : testing::synthetic_set(5, 51, {kSize, 0.0})) val.push_back({apply_mask(s.image.image, s.mask), s.image.label, s.image.source_id});
  TrainedClassifier m = train_classifier(std::move(untrained), train, val, {8, 80, 1e-2, 5});

  std::mt19937_64 gen(55);
  int image_mismatch = 0, prediction_mismatch = 0, heatmap_mismatch = 0;
  const auto fixtures = testing::synthetic_set(25, 500, {kSize, 0.0});
  for (const auto& f : fixtures) {
    // random mask: a union of random rectangles
    LungMask mask(kSize, kSize);
    for (int r = 0; r < 3; ++r) {
      const int x0 = static_cast<int>(gen() % kSize), y0 = static_cast<int>(gen() % kSize);
      const int x1 = std::min(kSize, x0 + 4 + static_cast<int>(gen() % 16));
      const int y1 = std::min(kSize, y0 + 4 + static_cast<int>(gen() % 16));
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) mask.set(x, y, true);
    }
    const RasterImage& base = f.image.image;
    RasterImage perturbed = base;
    for (int y = 0; y < kSize; ++y)
      for (int x = 0; x < kSize; ++x)
        if (!mask.at(x, y)) perturbed.at(x, y) = static_cast<std::uint8_t>(gen() & 0xff);
    const RasterImage a = apply_mask(base, mask), b = apply_mask(perturbed, mask);
    if (!(a == b)) ++image_mismatch;
    const Explanation ea = counterfactual_cam(m, a), eb = counterfactual_cam(m, b);
    if (!(ea.prediction == eb.prediction)) ++prediction_mismatch;
    if (ea.heatmap.values != eb.heatmap.values || ea.counterfactual.values != eb.counterfactual.values) {
      ++heatmap_mismatch;
    }
  }
  const double train_acc = accuracy_on(m, train);
  return {image_mismatch + prediction_mismatch + heatmap_mismatch == 0,
          fmt::format("{} images (toy classifier train acc {:.2f}): masked image / prediction / heatmap mismatches "
                      "{}/{}/{}",
                      fixtures.size(), train_acc, image_mismatch, prediction_mismatch, heatmap_mismatch)};
}

// ---------------------------------------------------------------- 6

Outcome criterion_6() {
  std::vector<RasterImage> fixtures;
  for (std::uint64_t s = 0; s < 6; ++s) fixtures.push_back(testing::textured_image(64, 48, s));
  for (std::uint64_t s = 0; s < 4; ++s) fixtures.push_back(testing::synthetic_chest(ClassLabel::kCovid, s).image.image);
  fixtures.push_back(random_gray(40, 9));

  int non_monotone = 0, clahe_mismatch = 0;
  for (const auto& img : fixtures) {
    const RasterImage out = hist_equalize(img);
    std::array<int, 256> map;
    map.fill(-1);
    for (std::size_t i = 0; i < img.pixels().size(); ++i) map[img.pixels()[i]] = out.pixels()[i];
    int last = -1;
    for (int v : map) {
      if (v < 0) continue;
      if (v < last) {
        ++non_monotone;
        break;
      }
      last = v;
    }
    if (!(clahe(img, 1e9, 1, 1) == out)) ++clahe_mismatch;
  }
  const RasterImage two(2, 1, 1, std::vector<std::uint8_t>{0, 255});
  const RasterImage four(4, 1, 1, std::vector<std::uint8_t>{52, 52, 154, 154});
  const bool endpoints = hist_equalize(two) == two &&
                         hist_equalize(four) == RasterImage(4, 1, 1, std::vector<std::uint8_t>{0, 0, 255, 255});
  int constant_changed = 0;
  for (int v : {0, 1, 77, 200, 255}) {
    const RasterImage c(17, 9, 1, static_cast<std::uint8_t>(v));
    if (!(hist_equalize(c) == c)) ++constant_changed;
  }
  return {non_monotone == 0 && clahe_mismatch == 0 && endpoints && constant_changed == 0,
          fmt::format("{} fixtures: non-monotone {}, CLAHE(1x1, large clip) != HE {}; endpoint examples {}; "
                      "constant images changed {}",
                      fixtures.size(), non_monotone, clahe_mismatch, endpoints ? "ok" : "wrong", constant_changed)};
}

// ---------------------------------------------------------------- 7

Outcome criterion_7() {
  const auto sample = testing::synthetic_chest(ClassLabel::kCovid, 7, {64, 0.0});
  SegmentationModel model = build_unet({2, 8, 64, 7});
  train_unet(model, {{hist_equalize(sample.image.image), sample.mask}}, {200, 3e-3, 7});
  const double d = dice(binarize_mask(predict_mask(model, hist_equalize(sample.image.image))), sample.mask);
  return {d > 0.95, fmt::format("depth-2 U-Net, 64x64 pair, 200 epochs: Dice {:.4f} (needs > 0.95)", d)};
}

// ---------------------------------------------------------------- 8, 10

// 100 covid + 100 normal 128x128 films, a U-Net trained on a disjoint set of
// 16 films, and a squeezenet run config.
json toy_run_fixture(const fs::path& root) {
  const auto films = testing::synthetic_set(100, 11, {128, 0.0});
  testing::write_synthetic_dataset(root / "data", root / "masks", films);

  const auto seg_films = testing::synthetic_set(8, 901, {128, 0.0});
  std::vector<SegmentationSample> pairs;
  for (const auto& f : seg_films) pairs.push_back({hist_equalize(f.image.image), f.mask});
  SegmentationModel unet = build_unet({3, 4, 128, 3});
  train_unet(unet, pairs, {15, 3e-3, 3});
  unet.save(root / "unet.ckpt");

  return {{"seed", 5},
          {"data", (root / "data").string()},
          {"output", (root / "out").string()},
          {"segmentation", {{"enabled", true}, {"weights", (root / "unet.ckpt").string()}}},
          {"architectures", {"squeezenet"}},
          {"train", {{"batch_size", 8}, {"epochs", 10}, {"learning_rate", 0.001}}},
          {"explain", true}};
}

Outcome criterion_8() {
  const fs::path root = testing::scratch_dir("acceptance_8");
  const json config = toy_run_fixture(root);
  const RunSummary summary = run_pipeline(PipelineConfig::from_json(config));
  const ModelOutcome& m = summary.models.at(0);
  const double acc = m.metrics.accuracy.value_or(0.0);
  const double overall = m.mean_out_of_mask_relevance.value_or(1.0);
  const std::optional<double> positive = m.mean_positive_out_of_mask_relevance;
  const bool pass = acc >= 0.90 && positive && *positive < 0.1;
  return {pass, fmt::format("test accuracy {:.4f} (needs >= 0.90) on {} images; out-of-mask relevance mean over "
                            "covid-predicted images {} (needs < 0.1), over all images {:.4f}",
                            acc, m.confusion.total(), positive ? fmt::format("{:.4f}", *positive) : "n/a", overall)};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LUNGSCOPE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_10() {
  const fs::path root = testing::scratch_dir("acceptance_10");
  json config = toy_run_fixture(root);
  std::ofstream(root / "run.json") << config.dump(2);
  const int a = run_cli(fmt::format("run --config {} --out {}", (root / "run.json").string(), (root / "a").string()),
                        root / "a.log");
  const int b = run_cli(fmt::format("run --config {} --out {}", (root / "run.json").string(), (root / "b").string()),
                        root / "b.log");
  if (a != 0 || b != 0) return {false, fmt::format("run exited with {} and {}", a, b)};
  const bool metrics = slurp(root / "a" / "metrics.json") == slurp(root / "b" / "metrics.json");
  const bool preds = slurp(root / "a" / "predictions.csv") == slurp(root / "b" / "predictions.csv");
  const bool nonempty = !slurp(root / "a" / "metrics.json").empty() && !slurp(root / "a" / "predictions.csv").empty();
  return {metrics && preds && nonempty,
          fmt::format("two `run` invocations: metrics.json {}, predictions.csv {}", metrics ? "identical" : "differ",
                      preds ? "identical" : "differ")};
}

// ---------------------------------------------------------------- 9

Outcome criterion_9() {
  const fs::path root = testing::scratch_dir("acceptance_9");
  // 500 per class leaves 325 per class in train, enough for 300 sources per
  // (op, class) without replacement.
  testing::write_synthetic_dataset(root / "data", root / "masks", testing::synthetic_set(500, 19, {64, 0.0}));
  const json config = {{"seed", 9},
                       {"data", (root / "data").string()},
                       {"output", (root / "out").string()},
                       {"segmentation", {{"enabled", false}}},
                       {"architectures", {"squeezenet"}},
                       {"width", 0.25},
                       {"train", {{"batch_size", 16}, {"epochs", 1}, {"learning_rate", 0.001}}},
                       {"sweep", json::object()}};
  const PipelineConfig cfg = PipelineConfig::from_json(config);
  run_sweep_pipeline(cfg);

  std::istringstream csv(slurp(root / "out" / "sweep.csv"));
  std::string header, line;
  std::getline(csv, header);
  std::vector<std::string> rows;
  while (std::getline(csv, line))
    if (!line.empty()) rows.push_back(line);
  bool counts_ok = rows.size() == 11, increasing = true;
  double last_fraction = -1.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> f;
    std::stringstream ss(rows[i]);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    counts_ok &= f.size() == 5 && f[0] == "squeezenet" && std::stoi(f[1]) == static_cast<int>(i) * 240;
    const double fraction = f.size() == 5 ? std::stod(f[2]) : -1.0;
    increasing &= fraction > last_fraction;
    last_fraction = fraction;
  }

  // Leakage, checked independently of the sweep's own guard.
  const PreparedData data = prepare_data(cfg);
  SweepConfig sweep_cfg = *cfg.sweep;
  sweep_cfg.seed = *cfg.seed;
  const auto pool = generate_augmented_set(data.splits.train, sweep_cfg);
  std::set<std::string> test_ids;
  for (const auto& img : data.splits.test) test_ids.insert(img.source_id);
  std::size_t leaked = 0;
  for (const auto& img : pool) leaked += test_ids.count(img.origin_id);

  TrainConfig tcfg = cfg.train;
  tcfg.seed = *cfg.seed;
  const std::string baseline = format_sweep_row(run_experiment(cfg.spec_for(Architecture::kSqueezeNet), data.splits, {}, tcfg));
  const bool same = !rows.empty() && rows[0] == baseline;
  return {counts_ok && increasing && leaked == 0 && same && header == kSweepCsvHeader,
          fmt::format("{} rows (needs 11, k = 0..2400 step 240); fraction strictly increasing: {}; pool of {} with {} "
                      "test-derived images; k=0 row {} the standalone baseline ({})",
                      rows.size(), increasing ? "yes" : "no", pool.size(), leaked,
                      same ? "byte-identical to" : "differs from", baseline)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lungscope acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run one criterion (1-10); default all")->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metrics reproduce the reference test matrix", criterion_1},
      {"metric identities", criterion_2},
      {"Grad-CAM analytic oracle and gradient check", criterion_3},
      {"counterfactual channel weights negate", criterion_4},
      {"out-of-mask perturbations are invisible after masking", criterion_5},
      {"histogram equalisation properties", criterion_6},
      {"U-Net overfits one pair", criterion_7},
      {"end-to-end toy run", criterion_8},
      {"augmentation sweep protocol", criterion_9},
      {"run determinism", criterion_10},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("criterion {:>2} {} | {} | {} [{:.1f} s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
               o.detail, secs);
    std::fflush(stdout);
    all &= o.pass;
  }
  return all ? 0 : 1;
}
