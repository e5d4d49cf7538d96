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
#include <vector>

#include "lungscope/image.hpp"
#include "lungscope/segmentation.hpp"

namespace lungscope::testing {

struct ChestOptions {
  int size = 128;
  /// Share of covid images that also carry a bright marker outside the lungs.
  double marker_rate = 0.0;
};

struct ChestSample {
  LabeledImage image;
  LungMask mask;
};

/// Grayscale film: bright body, two dark textured lung fields, and for covid a
/// bright elliptical opacity inside one lung.
ChestSample synthetic_chest(ClassLabel label, std::uint64_t seed, const ChestOptions& options = {});

/// n images per class; ids "covid/img_000.png", ...
std::vector<ChestSample> synthetic_set(int per_class, std::uint64_t seed, const ChestOptions& options = {});

/// Writes root/{covid,normal}/*.png plus masks/{covid,normal}/*.png.
void write_synthetic_dataset(const std::filesystem::path& root, const std::filesystem::path& mask_root,
                             const std::vector<ChestSample>& samples);

/// Deterministic texture image for filter fixtures.
RasterImage textured_image(int width, int height, std::uint64_t seed);

/// Fresh, empty temporary directory.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace lungscope::testing
