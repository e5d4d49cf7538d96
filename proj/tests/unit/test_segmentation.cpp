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
#include <random>

#include "lungscope/errors.hpp"
#include "lungscope/segmentation.hpp"
#include "support/synthetic.hpp"

using namespace lungscope;

namespace {

std::vector<std::vector<double>> snapshot(SegmentationModel& m) {
  std::vector<std::vector<double>> out;
  for (auto* p : m.parameters()) out.emplace_back(p->value.values().begin(), p->value.values().end());
  return out;
}

SegmentationSample chest_pair(int size, std::uint64_t seed) {
  const auto s = testing::synthetic_chest(ClassLabel::kNormal, seed, {size, 0.0});
  return {s.image.image, s.mask};
}

// Flood-fill oracle, independent of label_components.
std::vector<std::size_t> blob_sizes(const LungMask& m) {
  std::vector<int> seen(m.values().size(), 0);
  std::vector<std::size_t> sizes;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || seen[y * m.width() + x]) continue;
      std::size_t n = 0;
      std::vector<std::pair<int, int>> stack{{x, y}};
      seen[y * m.width() + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++n;
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
          if (!m.at(nx, ny) || seen[ny * m.width() + nx]) continue;
          seen[ny * m.width() + nx] = 1;
          stack.emplace_back(nx, ny);
        }
      }
      sizes.push_back(n);
    }
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

}  // namespace

TEST_SUITE("segmentation") {

TEST_CASE("unet shapes") {
  SegmentationModel small = build_unet({1, 4, 64, 0});
  const ProbabilityMap p = predict_mask(small, RasterImage(64, 64, 1, 0));
  CHECK(p.width == 64);
  CHECK(p.height == 64);
  for (double v : p.values) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  SegmentationModel deep = build_unet({4, 2, 256, 0});
  const ProbabilityMap q = predict_mask(deep, RasterImage(256, 256, 1, 128));
  CHECK(q.width == 256);
  CHECK(q.height == 256);
  CHECK(q.values.size() == 256u * 256u);
}

TEST_CASE("unet config validation") {
  CHECK_THROWS_AS(build_unet({3, 4, 60, 0}), Error);
  CHECK_THROWS_AS(build_unet({0, 4, 64, 0}), Error);
  try {
    build_unet({5, 4, 48, 0});
    FAIL("expected invalid config");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidConfig);
  }
}

TEST_CASE("seeded initialisation is reproducible") {
  SegmentationModel a = build_unet({2, 4, 32, 7});
  SegmentationModel b = build_unet({2, 4, 32, 7});
  SegmentationModel c = build_unet({2, 4, 32, 8});
  CHECK(snapshot(a) == snapshot(b));
  CHECK(snapshot(a) != snapshot(c));
}

TEST_CASE("predict_mask range and determinism") {
  SegmentationModel m = build_unet({2, 4, 32, 3});
  for (std::uint8_t v : {0, 255}) {
    const ProbabilityMap p = predict_mask(m, RasterImage(32, 32, 1, v));
    for (double x : p.values) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
  }
  const RasterImage img = testing::textured_image(32, 32, 1);
  CHECK(predict_mask(m, img).values == predict_mask(m, img).values);
  try {
    predict_mask(m, RasterImage(31, 32, 1));
    FAIL("expected invalid input");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidInput);
  }
}

TEST_CASE("overfitting one pair") {
  SegmentationModel m = build_unet({2, 4, 32, 1});
  const SegmentationSample pair = chest_pair(32, 5);
  train_unet(m, {pair}, {200, 3e-3, 1});
  const auto& meta = m.training_meta();
  CHECK(meta.epochs == 200);
  REQUIRE(meta.loss_trace.size() == 200);
  for (double l : meta.loss_trace) CHECK(std::isfinite(l));
  CHECK(meta.loss_trace.back() < meta.loss_trace.front());
  CHECK(dice(binarize_mask(predict_mask(m, pair.image)), pair.mask) > 0.95);
}

TEST_CASE("zero epochs leave the weights alone") {
  SegmentationModel m = build_unet({2, 4, 32, 2});
  const auto before = snapshot(m);
  train_unet(m, {chest_pair(32, 1)}, {0, 1e-3, 0});
  CHECK(snapshot(m) == before);
}

TEST_CASE("all-empty targets drive predictions to zero") {
  SegmentationModel m = build_unet({1, 4, 16, 4});
  std::vector<SegmentationSample> pairs;
  for (std::uint64_t s = 0; s < 3; ++s) pairs.push_back({testing::textured_image(16, 16, s), LungMask(16, 16, 0)});
  train_unet(m, pairs, {60, 3e-3, 0});
  for (const auto& p : pairs) {
    const ProbabilityMap pm = predict_mask(m, p.image);
    double mean = 0;
    for (double v : pm.values) mean += v;
    CHECK(mean / pm.values.size() < 0.1);
  }
}

TEST_CASE("train_unet input checks") {
  SegmentationModel m = build_unet({1, 4, 16, 0});
  try {
    train_unet(m, {{testing::textured_image(16, 16, 0), LungMask(8, 8)}}, {1, 1e-3, 0});
    FAIL("expected invalid data");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidData);
  }
  CHECK_THROWS_AS(train_unet(m, {}, {1, 1e-3, 0}), Error);
}

TEST_CASE("bce dice gradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-3, 3);
  std::vector<double> logits(20);
  std::vector<std::uint8_t> target(20);
  for (std::size_t i = 0; i < 20; ++i) {
    logits[i] = d(rng);
    target[i] = (rng() & 1) ? 1 : 0;
  }
  std::vector<double> grad;
  detail::bce_dice_loss(logits, target, &grad);
  for (std::size_t i = 0; i < 20; ++i) {
    auto l = logits;
    l[i] += 1e-6;
    const double up = detail::bce_dice_loss(l, target, nullptr);
    l[i] -= 2e-6;
    const double down = detail::bce_dice_loss(l, target, nullptr);
    CHECK(grad[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
  }
}

TEST_CASE("binarize") {
  ProbabilityMap high{4, 3, std::vector<double>(12, 0.9)};
  CHECK(binarize_mask(high) == LungMask(4, 3, 1));
  ProbabilityMap low{4, 3, std::vector<double>(12, 0.1)};
  CHECK(binarize_mask(low) == LungMask(4, 3, 0));
  ProbabilityMap edge{1, 1, {0.5}};
  CHECK(binarize_mask(edge).at(0, 0) == 1);
}

TEST_CASE("two-largest cleanup keeps the two biggest blobs") {
  ProbabilityMap p{20, 10, std::vector<double>(200, 0.0)};
  auto blob = [&](int x0, int y0, int w, int h) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) p.values[y * 20 + x] = 0.8;
  };
  blob(0, 0, 5, 5);   // 25
  blob(8, 0, 3, 3);   // 9
  blob(14, 2, 4, 6);  // 24
  const LungMask raw = binarize_mask(p);
  CHECK(blob_sizes(raw) == std::vector<std::size_t>{25, 24, 9});
  const auto [labels, n] = label_components(raw);
  CHECK(n == 3);
  const LungMask clean = binarize_mask(p, {0.5, true});
  CHECK(blob_sizes(clean) == std::vector<std::size_t>{25, 24});
  CHECK(clean.at(9, 1) == 0);
  CHECK(clean.at(0, 0) == 1);
  CHECK(clean.at(15, 5) == 1);

  // random masks: cleanup agrees with the flood-fill oracle
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    LungMask m(15, 15);
    for (int y = 0; y < 15; ++y)
      for (int x = 0; x < 15; ++x) m.set(x, y, rng() % 3 == 0);
    const auto all = blob_sizes(m);
    const auto kept = blob_sizes(keep_largest_components(m, 2));
    REQUIRE(kept.size() == std::min<std::size_t>(2, all.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i] == all[i]);
  }
}

TEST_CASE("apply_mask") {
  const RasterImage img = testing::textured_image(10, 6, 2);
  CHECK(apply_mask(img, LungMask(10, 6, 1)) == img);
  CHECK(apply_mask(img, LungMask(10, 6, 0)) == RasterImage(10, 6, 1, 0));
  LungMask left(10, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) left.set(x, y, true);
  const RasterImage out = apply_mask(img, left);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 10; ++x) CHECK(out.at(x, y) == (x < 5 ? img.at(x, y) : 0));
  CHECK_THROWS_AS(apply_mask(img, LungMask(9, 6, 1)), Error);
}

TEST_CASE("apply_mask properties") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 25; ++t) {
    const RasterImage a = testing::textured_image(12, 9, t);
    LungMask m(12, 9);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 12; ++x) m.set(x, y, rng() & 1);
    const RasterImage once = apply_mask(a, m);
    CHECK(apply_mask(once, m) == once);
    RasterImage b = a;
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 12; ++x)
        if (!m.at(x, y)) b.at(x, y) = static_cast<std::uint8_t>(rng() & 0xff);
    CHECK(apply_mask(b, m) == once);
  }
}

TEST_CASE("dice") {
  LungMask m(8, 8);
  for (int i = 0; i < 8; ++i) m.set(i, i, true);
  CHECK(dice(m, m) == 1.0);
  CHECK(dice(m, m.complement()) == 0.0);
  CHECK(dice(LungMask(3, 3), LungMask(3, 3)) == 1.0);
  LungMask half(2, 1);
  half.set(0, 0, true);
  CHECK(dice(half, LungMask(2, 1, 1)) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("mask helpers") {
  LungMask m(4, 4);
  m.set(1, 1, true);
  CHECK(m.count() == 1);
  CHECK(LungMask::from_image(m.to_image()) == m);
  const LungMask big = resize_mask(m, 8, 8);
  CHECK(big.count() == 4);
  CHECK(big.at(2, 2) == 1);
  CHECK_THROWS_AS(LungMask(2, 2, std::vector<std::uint8_t>{0, 1, 2, 0}), Error);
}

TEST_CASE("segmentation checkpoint round trip") {
  const auto dir = testing::scratch_dir("unet");
  SegmentationModel m = build_unet({2, 4, 32, 6});
  train_unet(m, {chest_pair(32, 2)}, {2, 1e-3, 0});
  m.save(dir / "unet.ckpt");
  SegmentationModel back = SegmentationModel::load(dir / "unet.ckpt");
  CHECK(back.config().depth == 2);
  CHECK(back.config().input_size == 32);
  const RasterImage img = testing::textured_image(32, 32, 3);
  CHECK(predict_mask(back, img).values == predict_mask(m, img).values);
  CHECK(back.training_meta().loss_trace == m.training_meta().loss_trace);
}

}  // TEST_SUITE
