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

#include "lungscope/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include <fmt/format.h>

#include "lungscope/errors.hpp"
#include "lungscope/nn/checkpoint.hpp"
#include "lungscope/nn/optim.hpp"

namespace lungscope {

using nn::Tensor;

LungMask::LungMask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw Error(ErrorKind::kInvalidArgument, "mask dimensions must be positive");
  values_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

LungMask::LungMask(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::kInvalidArgument, "mask value count does not match dimensions");
  }
  for (auto& v : values_) {
    if (v > 1) throw Error(ErrorKind::kInvalidArgument, "mask values must be 0 or 1");
  }
}

std::size_t LungMask::count() const { return std::count(values_.begin(), values_.end(), std::uint8_t{1}); }

LungMask LungMask::complement() const {
  LungMask out = *this;
  for (auto& v : out.values_) v = 1 - v;
  return out;
}

RasterImage LungMask::to_image() const {
  RasterImage img(width_, height_, 1);
  auto px = img.pixels();
  for (std::size_t i = 0; i < values_.size(); ++i) px[i] = values_[i] ? 255 : 0;
  return img;
}

LungMask LungMask::from_image(const RasterImage& img) {
  const RasterImage gray = to_grayscale(img);
  std::vector<std::uint8_t> values(gray.size());
  auto px = gray.pixels();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = px[i] >= 128 ? 1 : 0;
  return LungMask(gray.width(), gray.height(), std::move(values));
}

void UNetConfig::validate() const {
  if (depth < 1) throw Error(ErrorKind::kInvalidConfig, "unet depth must be >= 1");
  if (base_channels < 1) throw Error(ErrorKind::kInvalidConfig, "unet base_channels must be >= 1");
  if (input_size < 1 || input_size % (1 << depth) != 0) {
    throw Error(ErrorKind::kInvalidConfig,
                fmt::format("unet input_size {} is not divisible by 2^depth = {}", input_size, 1 << depth));
  }
}

namespace {

nn::Sequential double_conv(int in, int out, nn::Rng& rng) {
  nn::Sequential s;
  s.add<nn::Conv2d>(in, out, 3, 1, 1, rng);
  s.add<nn::ReLU>();
  s.add<nn::Conv2d>(out, out, 3, 1, 1, rng);
  s.add<nn::ReLU>();
  return s;
}

}  // namespace

UNet::UNet(const UNetConfig& cfg) {
  cfg.validate();
  nn::Rng rng(cfg.seed);
  int in = 1;
  for (int level = 0; level < cfg.depth; ++level) {
    const int ch = cfg.base_channels << level;
    encoders_.push_back(double_conv(in, ch, rng));
    pools_.emplace_back(nn::PoolGeometry{2, 2, 0});
    skip_channels_.push_back(ch);
    in = ch;
  }
  bottleneck_ = double_conv(in, cfg.base_channels << cfg.depth, rng);
  in = cfg.base_channels << cfg.depth;
  // Decoders are stored by level (index 0 = full resolution).
  ups_.reserve(cfg.depth);
  decoders_.resize(cfg.depth);
  std::vector<nn::UpConv2x2> ups;
  for (int level = cfg.depth - 1; level >= 0; --level) {
    const int ch = cfg.base_channels << level;
    ups.emplace_back(in, ch, rng);
    decoders_[level] = double_conv(2 * ch, ch, rng);
    in = ch;
  }
  for (auto it = ups.rbegin(); it != ups.rend(); ++it) ups_.push_back(std::move(*it));
  head_.add<nn::Conv2d>(in, 1, 1, 1, 0, rng);
}

Tensor UNet::forward(const Tensor& input) {
  Tensor x = input;
  std::vector<Tensor> skips;
  const int depth = static_cast<int>(encoders_.size());
  for (int level = 0; level < depth; ++level) {
    skips.push_back(encoders_[level].forward(x));
    x = pools_[level].forward(skips.back());
  }
  x = bottleneck_.forward(x);
  for (int level = depth - 1; level >= 0; --level) {
    Tensor up = ups_[level].forward(x);
    x = decoders_[level].forward(nn::concat_channels(skips[level], up));
  }
  return head_.forward(x);
}

Tensor UNet::backward(const Tensor& grad_output) {
  const int depth = static_cast<int>(encoders_.size());
  Tensor g = head_.backward(grad_output);
  std::vector<Tensor> skip_grads(depth);
  for (int level = 0; level < depth; ++level) {
    Tensor gcat = decoders_[level].backward(g);
    auto [g_skip, g_up] = nn::split_channels(gcat, skip_channels_[level]);
    skip_grads[level] = std::move(g_skip);
    g = ups_[level].backward(g_up);
  }
  g = bottleneck_.backward(g);
  for (int level = depth - 1; level >= 0; --level) {
    Tensor gs = pools_[level].backward(g);
    gs += skip_grads[level];
    g = encoders_[level].backward(gs);
  }
  return g;
}

void UNet::collect_parameters(std::vector<nn::Parameter*>& out) {
  for (auto& e : encoders_) e.collect_parameters(out);
  bottleneck_.collect_parameters(out);
  for (auto& u : ups_) u.collect_parameters(out);
  for (auto& d : decoders_) d.collect_parameters(out);
  head_.collect_parameters(out);
}

std::string UNet::describe() const {
  return fmt::format("unet(depth={}, base={})", encoders_.size(), skip_channels_.empty() ? 0 : skip_channels_[0]);
}

SegmentationModel::SegmentationModel(const UNetConfig& cfg) : config_(cfg), net_(std::make_unique<UNet>(cfg)) {}

std::vector<nn::Parameter*> SegmentationModel::parameters() {
  std::vector<nn::Parameter*> params;
  net_->collect_parameters(params);
  return params;
}

void SegmentationModel::save(const std::filesystem::path& path) {
  nlohmann::json header = {
      {"kind", "unet"},
      {"config",
       {{"depth", config_.depth},
        {"base_channels", config_.base_channels},
        {"input_size", config_.input_size},
        {"seed", config_.seed}}},
      {"training", {{"epochs", meta_.epochs}, {"final_loss", meta_.final_loss}, {"loss_trace", meta_.loss_trace}}},
  };
  nn::write_checkpoint(path, header, parameters());
}

SegmentationModel SegmentationModel::load(const std::filesystem::path& path) {
  const auto ckpt = nn::read_checkpoint(path);
  if (ckpt.header.value("kind", "") != "unet") {
    throw Error(ErrorKind::kInvalidModel, path.string() + " is not a segmentation checkpoint");
  }
  UNetConfig cfg;
  const auto& c = ckpt.header.at("config");
  cfg.depth = c.at("depth").get<int>();
  cfg.base_channels = c.at("base_channels").get<int>();
  cfg.input_size = c.at("input_size").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  SegmentationModel model(cfg);
  nn::load_parameters(ckpt, model.parameters());
  const auto& t = ckpt.header.at("training");
  model.meta_.epochs = t.at("epochs").get<int>();
  model.meta_.final_loss = t.at("final_loss").get<double>();
  model.meta_.loss_trace = t.at("loss_trace").get<std::vector<double>>();
  return model;
}

SegmentationModel build_unet(const UNetConfig& cfg) { return SegmentationModel(cfg); }

namespace {

Tensor image_tensor(const RasterImage& img) {
  Tensor t(1, 1, img.height(), img.width());
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) t[i] = px[i] / 255.0;
  return t;
}

void check_segmentation_input(const SegmentationModel& model, const RasterImage& img, ErrorKind kind) {
  const int s = model.config().input_size;
  if (img.channels() != 1 || img.width() != s || img.height() != s) {
    throw Error(kind, fmt::format("segmentation input must be single-channel {}x{}, got {}x{}x{}", s, s,
                                  img.width(), img.height(), img.channels()));
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

namespace detail {

double bce_dice_loss(std::span<const double> logits, std::span<const std::uint8_t> target, std::vector<double>* grad) {
  const std::size_t n = logits.size();
  std::vector<double> p(n);
  double bce = 0.0, inter = 0.0, sum_p = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i];
    const double y = target[i];
    p[i] = sigmoid(z);
    bce += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    inter += p[i] * y;
    sum_p += p[i];
    sum_y += y;
  }
  constexpr double kSmooth = 1.0;
  const double denom = sum_p + sum_y + kSmooth;
  const double dice_coef = (2.0 * inter + kSmooth) / denom;
  if (grad) {
    grad->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = target[i];
      const double d_dice_dp = (2.0 * y * denom - (2.0 * inter + kSmooth)) / (denom * denom);
      (*grad)[i] = (p[i] - y) / static_cast<double>(n) - d_dice_dp * p[i] * (1.0 - p[i]);
    }
  }
  return bce / static_cast<double>(n) + (1.0 - dice_coef);
}

}  // namespace detail

void train_unet(SegmentationModel& model, const std::vector<SegmentationSample>& pairs,
                const UNetTrainOptions& options) {
  if (pairs.empty()) throw Error(ErrorKind::kInvalidData, "train_unet needs at least one (image, mask) pair");
  for (const auto& pair : pairs) {
    check_segmentation_input(model, pair.image, ErrorKind::kInvalidData);
    if (pair.mask.width() != pair.image.width() || pair.mask.height() != pair.image.height()) {
      throw Error(ErrorKind::kInvalidData, "mask dimensions differ from image dimensions");
    }
  }
  if (options.epochs <= 0) return;
  auto params = model.parameters();
  nn::Adam adam(params, {.learning_rate = options.learning_rate});
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  nn::Rng rng(options.seed);
  auto& meta = model.training_meta();
  std::vector<double> grad;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const auto& pair = pairs[idx];
      Tensor logits = model.network().forward(image_tensor(pair.image));
      const double loss = detail::bce_dice_loss(logits.values(), pair.mask.values(), &grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kDivergence, fmt::format("segmentation loss became non-finite at epoch {}", epoch));
      }
      Tensor g(1, 1, logits.h(), logits.w());
      std::copy(grad.begin(), grad.end(), g.data());
      model.network().backward(g);
      adam.step();
      epoch_loss += loss;
    }
    epoch_loss /= static_cast<double>(pairs.size());
    meta.loss_trace.push_back(epoch_loss);
    meta.final_loss = epoch_loss;
    ++meta.epochs;
  }
}

ProbabilityMap predict_mask(SegmentationModel& model, const RasterImage& img) {
  check_segmentation_input(model, img, ErrorKind::kInvalidInput);
  Tensor logits = model.network().forward(image_tensor(img));
  ProbabilityMap map{img.width(), img.height(), std::vector<double>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) map.values[i] = sigmoid(logits[i]);
  return map;
}

std::pair<std::vector<int>, int> label_components(const LungMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> labels(static_cast<std::size_t>(w) * h, 0);
  int next = 0;
  std::queue<int> frontier;
  for (int start = 0; start < w * h; ++start) {
    if (!mask.values()[start] || labels[start]) continue;
    labels[start] = ++next;
    frontier.push(start);
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop();
      const int x = p % w, y = p / w;
      const int neighbours[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& nb : neighbours) {
        if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
        const int q = nb[1] * w + nb[0];
        if (mask.values()[q] && !labels[q]) {
          labels[q] = next;
          frontier.push(q);
        }
      }
    }
  }
  return {std::move(labels), next};
}

LungMask keep_largest_components(const LungMask& mask, int keep) {
  auto [labels, count] = label_components(mask);
  if (count <= keep) return mask;
  std::vector<std::size_t> sizes(count + 1, 0);
  for (int l : labels) ++sizes[l];
  std::vector<int> ids(count);
  std::iota(ids.begin(), ids.end(), 1);
  // Larger first; equal sizes keep raster-scan discovery order.
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  std::vector<bool> keep_label(count + 1, false);
  for (int i = 0; i < keep; ++i) keep_label[ids[i]] = true;
  std::vector<std::uint8_t> values(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) values[i] = keep_label[labels[i]] ? 1 : 0;
  return LungMask(mask.width(), mask.height(), std::move(values));
}

LungMask binarize_mask(const ProbabilityMap& probs, const BinarizeOptions& options) {
  std::vector<std::uint8_t> values(probs.values.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = probs.values[i] >= options.threshold ? 1 : 0;
  LungMask mask(probs.width, probs.height, std::move(values));
  return options.keep_two_largest ? keep_largest_components(mask, 2) : mask;
}

RasterImage apply_mask(const RasterImage& img, const LungMask& mask) {
  if (img.width() != mask.width() || img.height() != mask.height()) {
    throw Error(ErrorKind::kInvalidInput, fmt::format("mask {}x{} does not match image {}x{}", mask.width(),
                                                      mask.height(), img.width(), img.height()));
  }
  RasterImage out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!mask.at(x, y))
        for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = 0;
  return out;
}

LungMask resize_mask(const LungMask& mask, int width, int height) {
  if (width == mask.width() && height == mask.height()) return mask;
  const RasterImage scaled = resize_nearest(mask.to_image(), width, height);
  return LungMask::from_image(scaled);
}

double dice(const LungMask& a, const LungMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorKind::kInvalidInput, "dice of masks with different dimensions");
  }
  std::size_t inter = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) inter += a.values()[i] & b.values()[i];
  const std::size_t total = a.count() + b.count();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

}  // namespace lungscope
