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
#include <span>
#include <string>

#include "lungscope/image.hpp"

namespace lungscope {

/// Decodes PNG/JPEG (or anything the codec backend understands) into a 1- or
/// 3-channel 8-bit raster. Alpha is dropped.
RasterImage read_image(const std::filesystem::path& path);

/// Encoding is chosen from the extension (.png, .jpg, .jpeg).
void write_image(const std::filesystem::path& path, const RasterImage& img);

/// Cheap signature check used when enumerating datasets.
bool looks_like_image(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace lungscope
