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

#include "lungscope/image_io.hpp"

#include <fstream>
#include <iterator>
#include <vector>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lungscope/errors.hpp"

namespace lungscope {

RasterImage read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_ANYCOLOR);
  if (mat.empty()) {
    throw Error(ErrorKind::kIo, "cannot decode image " + path.string());
  }
  if (mat.depth() != CV_8U) {
    throw Error(ErrorKind::kInvalidImage, "only 8-bit images are supported: " + path.string());
  }
  if (mat.channels() == 4) {
    cv::cvtColor(mat, mat, cv::COLOR_BGRA2RGB);
  } else if (mat.channels() == 3) {
    cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  } else if (mat.channels() != 1) {
    throw Error(ErrorKind::kInvalidImage, "unsupported channel count in " + path.string());
  }
  if (!mat.isContinuous()) mat = mat.clone();
  std::vector<std::uint8_t> pixels(mat.data, mat.data + mat.total() * mat.channels());
  return RasterImage(mat.cols, mat.rows, mat.channels(), std::move(pixels));
}

void write_image(const std::filesystem::path& path, const RasterImage& img) {
  const int type = img.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat mat(img.height(), img.width(), type,
              const_cast<std::uint8_t*>(img.pixels().data()));
  cv::Mat out;
  if (img.channels() == 3) {
    cv::cvtColor(mat, out, cv::COLOR_RGB2BGR);
  } else {
    out = mat;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) {
    throw Error(ErrorKind::kIo, "cannot write image " + path.string());
  }
}

bool looks_like_image(const std::filesystem::path& path) {
  return cv::haveImageReader(path.string());
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

}  // namespace lungscope
