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

#include "lungscope/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "lungscope/csv.hpp"
#include "lungscope/errors.hpp"
#include "lungscope/image_io.hpp"

namespace lungscope {

std::size_t DatasetManifest::count(ClassLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [label](const ManifestEntry& e) { return e.label == label; }));
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  DatasetManifest manifest;
  manifest.root = root;
  for (auto label : kAllLabels) {
    const fs::path dir = root / std::string(to_string(label));
    if (!fs::is_directory(dir)) {
      throw Error(ErrorKind::kInvalidLayout, "missing class directory " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& item : fs::recursive_directory_iterator(dir)) {
      if (item.is_regular_file()) files.push_back(item.path());
    }
    for (const auto& file : files) {
      const std::string id = fs::relative(file, root).generic_string();
      if (!looks_like_image(file)) {
        manifest.skipped.push_back(id);
        continue;
      }
      manifest.entries.push_back({file, label, id});
    }
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.source_id < b.source_id; });
  std::sort(manifest.skipped.begin(), manifest.skipped.end());
  return manifest;
}

namespace {

std::vector<ManifestEntry> class_members(const DatasetManifest& manifest, ClassLabel label) {
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest.entries) {
    if (e.label == label) out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.source_id < b.source_id; });
  return out;
}

}  // namespace

DatasetManifest balanced_sample(const DatasetManifest& manifest, std::size_t n_pos, std::size_t n_neg,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DatasetManifest out;
  out.root = manifest.root;
  for (auto label : kAllLabels) {
    const std::size_t want = label == ClassLabel::kCovid ? n_pos : n_neg;
    auto members = class_members(manifest, label);
    if (members.size() < want) {
      throw Error(ErrorKind::kInvalidData, fmt::format("class {} has {} images, {} requested", to_string(label),
                                                       members.size(), want));
    }
    std::shuffle(members.begin(), members.end(), rng);
    out.entries.insert(out.entries.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(want));
  }
  return out;
}

void write_manifest_csv(const std::filesystem::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << "path,label,source_id\n";
  for (const auto& e : manifest.entries) {
    out << csv::escape(e.path.generic_string()) << ',' << to_string(e.label) << ',' << csv::escape(e.source_id)
        << '\n';
  }
}

DatasetManifest read_manifest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  DatasetManifest manifest;
  std::string line;
  std::getline(in, line);
  if (csv::split(line) != std::vector<std::string>{"path", "label", "source_id"}) {
    throw Error(ErrorKind::kInvalidData, path.string() + " lacks the path,label,source_id header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != 3) throw Error(ErrorKind::kInvalidData, "malformed manifest row: " + line);
    manifest.entries.push_back({fields[0], parse_label(fields[1]), fields[2]});
  }
  return manifest;
}

void SplitRatios::validate() const {
  if (train < 0.0 || val < 0.0 || test < 0.0 || std::abs(train + val + test - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidSplit,
                fmt::format("split ratios ({}, {}, {}) must be nonnegative and sum to 1", train, val, test));
  }
}

namespace {

// Distributes `quota` across classes proportionally to `ideal`, floor first
// then by largest fractional part (ties to the lower class index).
std::vector<std::size_t> apportion(const std::vector<double>& ideal, std::size_t quota,
                                   const std::vector<std::size_t>& cap) {
  std::vector<std::size_t> out(ideal.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    out[i] = std::min(cap[i], static_cast<std::size_t>(std::floor(ideal[i] + 1e-9)));
    assigned += out[i];
  }
  std::vector<std::size_t> order(ideal.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ideal[a] - std::floor(ideal[a] + 1e-9) > ideal[b] - std::floor(ideal[b] + 1e-9);
  });
  while (assigned < quota) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (assigned == quota) break;
      if (out[i] < cap[i]) {
        ++out[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return out;
}

}  // namespace

SplitAssignment split_dataset(const DatasetManifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  const std::size_t n = manifest.entries.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n) + 1e-9));
  const std::size_t n_test = n - std::min(n, n_train + n_val);
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw Error(ErrorKind::kInvalidSplit,
                fmt::format("split of {} images gives sizes {}/{}/{}; every split must be nonempty", n, n_train,
                            n_val, n_test));
  }

  std::vector<std::vector<ManifestEntry>> members;
  std::vector<std::size_t> sizes;
  for (auto label : kAllLabels) {
    members.push_back(class_members(manifest, label));
    sizes.push_back(members.back().size());
  }
  std::vector<double> ideal_train, ideal_val;
  for (auto s : sizes) {
    ideal_train.push_back(ratios.train * static_cast<double>(s));
    ideal_val.push_back(ratios.val * static_cast<double>(s));
  }
  const auto train_c = apportion(ideal_train, n_train, sizes);
  std::vector<std::size_t> remaining(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) remaining[i] = sizes[i] - train_c[i];
  const auto val_c = apportion(ideal_val, n_val, remaining);

  std::mt19937_64 rng(seed);
  SplitAssignment out;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t i = 0; i < m.size(); ++i) {
      auto& dst = i < train_c[c] ? out.train : (i < train_c[c] + val_c[c] ? out.val : out.test);
      dst.push_back(m[i].source_id);
    }
  }
  if (out.train.empty() || out.val.empty() || out.test.empty()) {
    throw Error(ErrorKind::kInvalidSplit, "stratified split produced an empty subset");
  }
  return out;
}

nlohmann::json splits_to_json(const SplitAssignment& splits) {
  return {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
}

SplitAssignment splits_from_json(const nlohmann::json& j) {
  SplitAssignment s;
  s.train = j.at("train").get<std::vector<std::string>>();
  s.val = j.at("val").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

PreprocessedImage preprocess_image(const RasterImage& img, const PreprocessOptions& options) {
  PreprocessedImage out;
  RasterImage t = enhance(to_grayscale(img), options.enhancement);
  if (options.segmentation != nullptr) {
    const int s = options.segmentation->config().input_size;
    const ProbabilityMap probs = predict_mask(*options.segmentation, resize(t, s, s));
    const LungMask mask = resize_mask(binarize_mask(probs, options.binarize), t.width(), t.height());
    t = apply_mask(t, mask);
    out.mask = mask;
  }
  if (options.output_size > 0) {
    t = resize(t, options.output_size, options.output_size);
    if (out.mask) out.mask = resize_mask(*out.mask, options.output_size, options.output_size);
  }
  out.image = std::move(t);
  return out;
}

std::filesystem::path cache_dir_from_env() {
  const char* dir = std::getenv("LUNGSCOPE_CACHE_DIR");
  return dir != nullptr && *dir != '\0' ? std::filesystem::path(dir) : std::filesystem::path();
}

namespace {

std::uint64_t options_fingerprint(const PreprocessOptions& options) {
  const auto& e = options.enhancement;
  std::string text = fmt::format("{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}", to_string(e.method), e.clahe_clip,
                                 e.clahe_tile_rows, e.clahe_tile_cols, e.unsharp_sigma, e.unsharp_amount,
                                 e.laplacian_amount, e.butterworth_order, e.butterworth_cutoff, options.output_size,
                                 options.binarize.threshold, options.binarize.keep_two_largest,
                                 options.segmentation != nullptr);
  std::uint64_t h = fnv1a64({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  if (options.segmentation != nullptr) {
    for (auto* p : options.segmentation->parameters()) {
      h = fnv1a64({reinterpret_cast<const std::uint8_t*>(p->value.data()), p->value.size() * sizeof(double)}, h);
    }
  }
  return h;
}

struct Slot {
  std::optional<RasterImage> decoded;
  std::optional<PreprocessedImage> done;
  std::filesystem::path cache_image;
  std::filesystem::path cache_mask;
  std::string failure;
};

}  // namespace

PreprocessResult preprocess_all(const DatasetManifest& manifest, const PreprocessOptions& options) {
  options.enhancement.validate();
  const std::size_t n = manifest.entries.size();
  const bool segmenting = options.segmentation != nullptr;
  const bool caching = !options.cache_dir.empty();
  const std::uint64_t fingerprint = caching ? options_fingerprint(options) : 0;
  if (caching) std::filesystem::create_directories(options.cache_dir);

  std::vector<Slot> slots(n);
  // Stage 1 (parallel): decode, or satisfy from cache; filter when no
  // segmentation model is involved.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    auto& slot = slots[i];
    const auto& entry = manifest.entries[i];
    try {
      if (caching) {
        const std::string key = hex64(fnv1a64(
            {reinterpret_cast<const std::uint8_t*>(&fingerprint), sizeof(fingerprint)}, hash_file(entry.path)));
        slot.cache_image = options.cache_dir / (key + ".png");
        slot.cache_mask = options.cache_dir / (key + ".mask.png");
        if (std::filesystem::exists(slot.cache_image) && (!segmenting || std::filesystem::exists(slot.cache_mask))) {
          PreprocessedImage cached;
          cached.image = read_image(slot.cache_image);
          if (segmenting) cached.mask = LungMask::from_image(read_image(slot.cache_mask));
          slot.done = std::move(cached);
          continue;
        }
      }
      RasterImage img = read_image(entry.path);
      if (!segmenting) {
        slot.done = preprocess_image(img, options);
      } else {
        slot.decoded = std::move(img);
      }
    } catch (const std::exception& e) {
      slot.failure = e.what();
    }
  }
  // Stage 2 (serial): the segmentation model is stateful during inference.
  if (segmenting) {
    for (auto& slot : slots) {
      if (!slot.decoded) continue;
      try {
        slot.done = preprocess_image(*slot.decoded, options);
      } catch (const std::exception& e) {
        slot.failure = e.what();
      }
      slot.decoded.reset();
    }
  }

  PreprocessResult result;
  for (std::size_t i = 0; i < n; ++i) {
    auto& slot = slots[i];
    const auto& entry = manifest.entries[i];
    if (!slot.done) {
      result.failures.push_back(entry.source_id + ": " + (slot.failure.empty() ? "not processed" : slot.failure));
      continue;
    }
    if (caching && !std::filesystem::exists(slot.cache_image)) {
      write_image(slot.cache_image, slot.done->image);
      if (slot.done->mask) write_image(slot.cache_mask, slot.done->mask->to_image());
    }
    LabeledImage li;
    li.image = std::move(slot.done->image);
    li.label = entry.label;
    li.source_id = entry.source_id;
    result.images.push_back(std::move(li));
    if (segmenting) result.masks.push_back(std::move(*slot.done->mask));
  }
  if (n > 0 && static_cast<double>(result.failures.size()) > options.max_failure_rate * static_cast<double>(n)) {
    throw Error(ErrorKind::kInvalidData,
                fmt::format("{} of {} images failed preprocessing (limit {:.0f}%); first: {}", result.failures.size(),
                            n, options.max_failure_rate * 100.0, result.failures.front()));
  }
  return result;
}

std::filesystem::path mirrored_png(const std::filesystem::path& dir, const std::string& source_id) {
  std::filesystem::path rel(source_id);
  rel.replace_extension(".png");
  return dir / rel;
}

void write_preprocessed(const std::filesystem::path& out_dir, const PreprocessResult& result) {
  for (const auto& img : result.images) write_image(mirrored_png(out_dir, img.source_id), img.image);
}

}  // namespace lungscope
