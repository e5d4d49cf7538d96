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

#include "support/synthetic.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "lungscope/image_io.hpp"

namespace lungscope::testing {

namespace {

struct Ellipse {
  double cx, cy, rx, ry;
  double r2(double x, double y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return dx * dx + dy * dy;
  }
};

}  // namespace

ChestSample synthetic_chest(ClassLabel label, std::uint64_t seed, const ChestOptions& options) {
  const int s = options.size;
  const double S = s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const Ellipse left{S * (0.29 + 0.015 * jitter(rng)), S * (0.50 + 0.015 * jitter(rng)), S * (0.18 + 0.01 * jitter(rng)),
                     S * (0.36 + 0.015 * jitter(rng))};
  const Ellipse right{S * (0.71 + 0.015 * jitter(rng)), S * (0.50 + 0.015 * jitter(rng)),
                      S * (0.18 + 0.01 * jitter(rng)), S * (0.36 + 0.015 * jitter(rng))};
  const double rib_phase = 3.0 * jitter(rng);
  const double body_level = 165.0 + 10.0 * jitter(rng);
  const double lung_level = 70.0 + 10.0 * jitter(rng);

  const bool covid = label == ClassLabel::kCovid;
  const Ellipse& host = jitter(rng) < 0.0 ? left : right;
  const double angle = jitter(rng) * 0.6;
  const Ellipse opacity{host.cx + 0.35 * host.rx * jitter(rng), host.cy + 0.35 * host.ry * jitter(rng),
                        S * (0.07 + 0.015 * jitter(rng)), S * (0.10 + 0.02 * jitter(rng))};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool marker = covid && unit(rng) < options.marker_rate;
  const int mx = static_cast<int>(S * (0.04 + 0.04 * unit(rng)));
  const int my = static_cast<int>(S * (0.04 + 0.04 * unit(rng)));
  const int msize = std::max(2, s / 14);

  RasterImage img(s, s, 1);
  LungMask mask(s, s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const bool in_lung = left.r2(x, y) <= 1.0 || right.r2(x, y) <= 1.0;
      double v;
      if (in_lung) {
        v = lung_level + 8.0 * std::sin(y * 0.35 + rib_phase) + 6.0 * noise(rng);
        if (covid) {
          const double dx = x - opacity.cx;
          const double dy = y - opacity.cy;
          const double u = (std::cos(angle) * dx + std::sin(angle) * dy) / opacity.rx;
          const double w = (-std::sin(angle) * dx + std::cos(angle) * dy) / opacity.ry;
          const double r2 = u * u + w * w;
          if (r2 <= 1.0) v += 100.0 * (1.0 - 0.5 * r2);
        }
        mask.set(x, y, true);
      } else {
        const double edge = std::min(x, s - 1 - x) / (0.08 * S);
        v = body_level * std::min(1.0, 0.35 + edge) + 5.0 * noise(rng);
      }
      if (marker && x >= mx && x < mx + msize && y >= my && y < my + msize) v = 250.0;
      img.at(x, y, 0) = clamp_to_byte(v);
    }
  }
  ChestSample sample;
  sample.image.image = std::move(img);
  sample.image.label = label;
  sample.mask = std::move(mask);
  return sample;
}

std::vector<ChestSample> synthetic_set(int per_class, std::uint64_t seed, const ChestOptions& options) {
  std::vector<ChestSample> out;
  for (auto label : kAllLabels) {
    for (int i = 0; i < per_class; ++i) {
      const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(class_index(label)) * 100003ULL + i;
      ChestSample sample = synthetic_chest(label, s, options);
      sample.image.source_id = fmt::format("{}/img_{:03d}.png", to_string(label), i);
      out.push_back(std::move(sample));
    }
  }
  return out;
}

void write_synthetic_dataset(const std::filesystem::path& root, const std::filesystem::path& mask_root,
                             const std::vector<ChestSample>& samples) {
  for (const auto& s : samples) {
    write_image(root / s.image.source_id, s.image.image);
    if (!mask_root.empty()) write_image(mask_root / s.image.source_id, s.mask.to_image());
  }
}

RasterImage textured_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(-20, 20);
  RasterImage img(width, height, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double base = 128.0 + 60.0 * std::sin(x * 0.21) * std::cos(y * 0.17) + 0.4 * (x - y);
      img.at(x, y, 0) = clamp_to_byte(base + noise(rng));
    }
  }
  return img;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lungscope_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace lungscope::testing
