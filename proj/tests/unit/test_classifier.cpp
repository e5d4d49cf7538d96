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

#include <cmath>
#include <random>

#include "lungscope/classifier.hpp"
#include "lungscope/errors.hpp"
#include "support/synthetic.hpp"

using namespace lungscope;

namespace {

// Covid images carry a bright square, normal ones do not.
std::vector<LabeledImage> square_set(int per_class, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledImage> out;
  for (int i = 0; i < 2 * per_class; ++i) {
    const ClassLabel label = i % 2 ? ClassLabel::kNormal : ClassLabel::kCovid;
    RasterImage img(size, size, 1);
    for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(40 + rng() % 40);
    if (label == ClassLabel::kCovid) {
      const int s = size / 3;
      const int x0 = static_cast<int>(rng() % (size - s)), y0 = static_cast<int>(rng() % (size - s));
      for (int y = y0; y < y0 + s; ++y)
        for (int x = x0; x < x0 + s; ++x) img.at(x, y) = 230;
    }
    out.push_back({img, label, "img_" + std::to_string(i)});
  }
  return out;
}

}  // namespace

TEST_SUITE("classifier") {

TEST_CASE("architecture names and sizes") {
  CHECK(parse_architecture("resnet50") == Architecture::kResNet50);
  CHECK(to_string(Architecture::kInceptionV3) == "inceptionv3");
  CHECK(canonical_input_size(Architecture::kSqueezeNet) == 224);
  CHECK(canonical_input_size(Architecture::kAlexNet) == 244);
  CHECK(canonical_input_size(Architecture::kResNet50) == 244);
  CHECK(canonical_input_size(Architecture::kInceptionV3) == 299);
  try {
    parse_architecture("vgg16");
    FAIL("expected invalid config");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidConfig);
  }
}

TEST_CASE("squeezenet takes 224 input and emits two scores") {
  TrainedClassifier m = build_classifier(ArchitectureSpec::of(Architecture::kSqueezeNet, 1));
  CHECK(m.input_size() == 224);
  const Prediction p = predict(m, testing::textured_image(224, 224, 1));
  CHECK(std::isfinite(p.scores[0]));
  CHECK(std::isfinite(p.scores[1]));
  CHECK(p.probabilities[0] + p.probabilities[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("every architecture builds and runs at reduced width") {
  for (auto arch : {Architecture::kAlexNet, Architecture::kResNet50, Architecture::kInceptionV3,
                    Architecture::kSqueezeNet}) {
    TrainedClassifier m = build_classifier(ArchitectureSpec::of(arch, 2, 0.25));
    const int s = canonical_input_size(arch);
    const Prediction p = predict(m, testing::textured_image(s, s, 2));
    CHECK(std::abs(p.probabilities[0] + p.probabilities[1] - 1.0) < 1e-6);
  }
}

TEST_CASE("input size is fixed per architecture") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet);
  spec.input_size = 32;
  CHECK_THROWS_AS(build_classifier(spec), Error);
}

TEST_CASE("inceptionv3 rejects 224 input") {
  TrainedClassifier m = build_classifier(ArchitectureSpec::of(Architecture::kInceptionV3, 0, 0.25));
  try {
    predict(m, testing::textured_image(224, 224, 0));
    FAIL("expected invalid input");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidInput);
  }
}

TEST_CASE("seeded initialisation") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 11, 0.5);
  TrainedClassifier a = build_classifier(spec);
  TrainedClassifier b = build_classifier(spec);
  spec.seed = 12;
  TrainedClassifier c = build_classifier(spec);
  auto flat = [](TrainedClassifier& m) {
    std::vector<double> v;
    for (auto* p : m.parameters()) v.insert(v.end(), p->value.values().begin(), p->value.values().end());
    return v;
  };
  CHECK(flat(a) == flat(b));
  CHECK(flat(a) != flat(c));
}

TEST_CASE("pretrained needs a checkpoint") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 3, 0.25);
  spec.pretrained = true;
  try {
    build_classifier(spec);
    FAIL("expected resource error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kResource);
  }
  const auto dir = testing::scratch_dir("pretrained");
  auto donor_spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 99, 0.25);
  TrainedClassifier donor = build_classifier(donor_spec);
  donor.save(dir / "sq.ckpt");
  spec.pretrained_weights = dir / "sq.ckpt";
  TrainedClassifier m = build_classifier(spec);
  std::vector<nn::Parameter*> a, b;
  m.features().collect_parameters(a);
  donor.features().collect_parameters(b);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value.values()[0] == b[i]->value.values()[0]);

  auto other = ArchitectureSpec::of(Architecture::kAlexNet, 3, 0.25);
  other.pretrained = true;
  other.pretrained_weights = dir / "sq.ckpt";
  CHECK_THROWS_AS(build_classifier(other), Error);
}

TEST_CASE("scores to prediction") {
  const Prediction tie = prediction_from_scores(0.7, 0.7);
  CHECK(tie.label == ClassLabel::kCovid);
  CHECK(tie.probabilities[0] == 0.5);
  const Prediction p = prediction_from_scores(-1.0, 2.0);
  CHECK(p.label == ClassLabel::kNormal);
  CHECK(p.probabilities[1] == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-12));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-20, 20);
  for (int i = 0; i < 200; ++i) {
    const double a = d(rng), b = d(rng), shift = d(rng) * 10;
    const Prediction x = prediction_from_scores(a, b);
    const Prediction y = prediction_from_scores(a + shift, b + shift);
    CHECK(std::abs(x.probabilities[0] + x.probabilities[1] - 1.0) < 1e-12);
    CHECK(std::abs(x.probabilities[0] - y.probabilities[0]) < 1e-9);
    CHECK(x.label == y.label);
  }
  CHECK(prediction_from_scores(1000.0, -1000.0).probabilities[0] == 1.0);
}

TEST_CASE("training a separable toy set") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 5, 0.5);
  const auto train = square_set(10, 224, 1);
  const auto val = square_set(5, 224, 2);
  const TrainConfig cfg{4, 30, 0.003, 7};

  TrainedClassifier m = train_classifier(build_classifier(spec), train, val, cfg);
  REQUIRE(m.history().size() == 30);
  CHECK(accuracy_on(m, train) == 1.0);
  CHECK(m.history().back().train_accuracy == 1.0);
  const auto& h = m.history();
  for (std::size_t e = h.size() - 5; e + 1 < h.size(); ++e) CHECK(h[e + 1].val_accuracy >= h[e].val_accuracy - 0.05);

  const auto held_out = square_set(3, 224, 3);
  for (const auto& img : held_out) CHECK(predict(m, img.image).label == img.label);

  TrainedClassifier again = train_classifier(build_classifier(spec), train, val, cfg);
  REQUIRE(again.history().size() == h.size());
  for (std::size_t e = 0; e < h.size(); ++e) {
    CHECK(again.history()[e].train_loss == h[e].train_loss);
    CHECK(again.history()[e].val_loss == h[e].val_loss);
  }
}

TEST_CASE("zero epochs and bad inputs") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 5, 0.25);
  const auto set = square_set(2, 224, 1);
  TrainedClassifier m = build_classifier(spec);
  std::vector<double> before;
  for (auto* p : m.parameters()) before.insert(before.end(), p->value.values().begin(), p->value.values().end());
  TrainedClassifier same = train_classifier(std::move(m), set, set, {4, 0, 1e-3, 0});
  std::vector<double> after;
  for (auto* p : same.parameters()) after.insert(after.end(), p->value.values().begin(), p->value.values().end());
  CHECK(before == after);
  CHECK(same.history().empty());

  for (auto [tr, va] : {std::pair{std::vector<LabeledImage>{}, set}, std::pair{set, std::vector<LabeledImage>{}}}) {
    try {
      train_classifier(build_classifier(spec), tr, va, {4, 1, 1e-3, 0});
      FAIL("expected invalid data");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kInvalidData);
    }
  }
  CHECK_THROWS_AS((TrainConfig{0, 1, 1e-3, 0}.validate()), Error);
  CHECK_THROWS_AS((TrainConfig{4, 1, -1.0, 0}.validate()), Error);
}

TEST_CASE("diverging training is reported") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 5, 0.25);
  const auto set = square_set(4, 224, 1);
  try {
    train_classifier(build_classifier(spec), set, set, {2, 5, 1e200, 0});
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDivergence);
  }
}

TEST_CASE("batch prediction equals single prediction") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 8, 0.25);
  TrainedClassifier m = build_classifier(spec);
  std::vector<RasterImage> imgs;
  for (int i = 0; i < 8; ++i) imgs.push_back(testing::textured_image(224, 224, i));
  CHECK(predict_batch(m, {}).empty());
  const auto one = predict_batch(m, {imgs[0]});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == predict(m, imgs[0]));
  const auto all = predict_batch(m, imgs);
  for (int i = 0; i < 8; ++i) CHECK(all[i] == predict(m, imgs[i]));
  CHECK(predict(m, imgs[3]) == predict(m, imgs[3]));

  imgs[5] = testing::textured_image(200, 224, 0);
  try {
    predict_batch(m, imgs);
    FAIL("expected invalid input");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidInput);
    CHECK(std::string(e.what()).find("5") != std::string::npos);
  }
}

TEST_CASE("grayscale and colour inputs agree") {
  auto spec = ArchitectureSpec::of(Architecture::kSqueezeNet, 8, 0.25);
  TrainedClassifier m = build_classifier(spec);
  const RasterImage g = testing::textured_image(224, 224, 3);
  CHECK(predict(m, g) == predict(m, gray_to_rgb(g)));
}

TEST_CASE("classifier checkpoint round trip") {
  const auto dir = testing::scratch_dir("clf");
  auto spec = ArchitectureSpec::of(Architecture::kResNet50, 4, 0.25);
  const auto set = square_set(2, 244, 5);
  TrainedClassifier m = train_classifier(build_classifier(spec), set, set, {2, 1, 1e-3, 0});
  m.save(dir / "m.ckpt");
  TrainedClassifier back = TrainedClassifier::load(dir / "m.ckpt");
  REQUIRE(back.spec().has_value());
  CHECK(back.spec()->name == Architecture::kResNet50);
  CHECK(back.input_size() == 244);
  CHECK(back.ready());
  CHECK(back.history().size() == 1);
  for (const auto& img : set) CHECK(predict(back, img.image) == predict(m, img.image));
}

}  // TEST_SUITE
