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

#include <algorithm>
#include <cmath>

#include "lungscope/classifier.hpp"
#include "lungscope/errors.hpp"

namespace lungscope {

using nn::Branches;
using nn::Conv2d;
using nn::ConvGeometry;
using nn::PoolGeometry;
using nn::ReLU;
using nn::Rng;
using nn::Sequential;

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kAlexNet: return "alexnet";
    case Architecture::kResNet50: return "resnet50";
    case Architecture::kInceptionV3: return "inceptionv3";
    case Architecture::kSqueezeNet: return "squeezenet";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view text) {
  for (auto arch : {Architecture::kAlexNet, Architecture::kResNet50, Architecture::kInceptionV3,
                    Architecture::kSqueezeNet}) {
    if (to_string(arch) == text) return arch;
  }
  throw Error(ErrorKind::kInvalidConfig,
              "unknown architecture '" + std::string(text) + "' (expected alexnet, resnet50, inceptionv3, squeezenet)");
}

int canonical_input_size(Architecture arch) {
  switch (arch) {
    case Architecture::kAlexNet:
    case Architecture::kResNet50: return 244;
    case Architecture::kInceptionV3: return 299;
    case Architecture::kSqueezeNet: return 224;
  }
  return 0;
}

ArchitectureSpec ArchitectureSpec::of(Architecture arch, std::uint64_t seed, double width) {
  ArchitectureSpec spec;
  spec.name = arch;
  spec.input_size = canonical_input_size(arch);
  spec.seed = seed;
  spec.width = width;
  return spec;
}

void ArchitectureSpec::validate() const {
  if (input_size != canonical_input_size(name)) {
    throw Error(ErrorKind::kInvalidConfig, std::string(to_string(name)) + " takes " +
                                               std::to_string(canonical_input_size(name)) + "x" +
                                               std::to_string(canonical_input_size(name)) + " input, not " +
                                               std::to_string(input_size));
  }
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw Error(ErrorKind::kInvalidConfig, "architecture width multiplier must be positive");
  }
}

namespace {

class Builder {
 public:
  Builder(double width, Rng& rng) : width_(width), rng_(rng) {}

  int ch(int base) const { return std::max(1, static_cast<int>(std::lround(base * width_))); }

  void conv(Sequential& seq, int in, int out, int kernel, int stride, int pad) {
    seq.add<Conv2d>(in, out, kernel, stride, pad, rng_);
    seq.add<ReLU>();
  }
  void conv(Sequential& seq, int in, int out, ConvGeometry g) {
    seq.add<Conv2d>(in, out, g, rng_);
    seq.add<ReLU>();
  }
  static ConvGeometry rect(int kh, int kw) { return ConvGeometry{kh, kw, 1, kh / 2, kw / 2}; }

  Rng& rng() { return rng_; }

 private:
  double width_;
  Rng& rng_;
};

// squeeze 1x1 -> expand (1x1 | 3x3)
int fire(Builder& b, Sequential& seq, int in, int squeeze, int expand) {
  const int s = b.ch(squeeze);
  const int e = b.ch(expand);
  b.conv(seq, in, s, 1, 1, 0);
  auto& br = seq.add<Branches>();
  b.conv(br.branch(), s, e, 1, 1, 0);
  b.conv(br.branch(), s, e, 3, 1, 1);
  return 2 * e;
}

Backbone squeezenet(Builder& b) {
  Backbone bb;
  auto& f = bb.features;
  int c = b.ch(16);
  b.conv(f, 3, c, 3, 2, 1);
  f.add<nn::MaxPool>(PoolGeometry{2, 2, 0});
  c = fire(b, f, c, 8, 16);
  c = fire(b, f, c, 8, 16);
  f.add<nn::MaxPool>(PoolGeometry{2, 2, 0});
  c = fire(b, f, c, 16, 32);
  c = fire(b, f, c, 16, 32);
  bb.feature_channels = c;
  return bb;
}

Backbone alexnet(Builder& b) {
  Backbone bb;
  auto& f = bb.features;
  const int c1 = b.ch(16), c2 = b.ch(32), c3 = b.ch(48), c4 = b.ch(32);
  b.conv(f, 3, c1, 11, 4, 2);
  f.add<nn::MaxPool>(PoolGeometry{3, 2, 0});
  b.conv(f, c1, c2, 5, 1, 2);
  f.add<nn::MaxPool>(PoolGeometry{3, 2, 0});
  b.conv(f, c2, c3, 3, 1, 1);
  b.conv(f, c3, c4, 3, 1, 1);
  b.conv(f, c4, c4, 3, 1, 1);
  bb.feature_channels = c4;
  return bb;
}

int bottleneck(Builder& b, Sequential& seq, int in, int mid, int stride) {
  const int out = 4 * mid;
  auto& res = seq.add<nn::Residual>();
  b.conv(res.main(), in, mid, 1, 1, 0);
  b.conv(res.main(), mid, mid, 3, stride, 1);
  // Residual branches start at zero so every block begins as its shortcut.
  res.main().add<Conv2d>(mid, out, 1, 1, 0, b.rng(), true);
  if (stride != 1 || in != out) res.shortcut().add<Conv2d>(in, out, 1, stride, 0, b.rng());
  seq.add<ReLU>();
  return out;
}

Backbone resnet50(Builder& b) {
  Backbone bb;
  auto& f = bb.features;
  int c = b.ch(16);
  b.conv(f, 3, c, 7, 2, 3);
  f.add<nn::MaxPool>(PoolGeometry{3, 2, 1});
  const int blocks[4] = {3, 4, 6, 3};
  const int mids[4] = {8, 16, 32, 64};
  for (int stage = 0; stage < 4; ++stage) {
    for (int i = 0; i < blocks[stage]; ++i) {
      const int stride = (stage > 0 && i == 0) ? 2 : 1;
      c = bottleneck(b, f, c, b.ch(mids[stage]), stride);
    }
  }
  bb.feature_channels = c;
  return bb;
}

int inception_a(Builder& b, Sequential& seq, int in, int pool_features) {
  auto& br = seq.add<Branches>();
  const int c1 = b.ch(16), c5r = b.ch(12), c5 = b.ch(16), c3r = b.ch(16), c3 = b.ch(24), cp = b.ch(pool_features);
  b.conv(br.branch(), in, c1, 1, 1, 0);
  auto& b5 = br.branch();
  b.conv(b5, in, c5r, 1, 1, 0);
  b.conv(b5, c5r, c5, 5, 1, 2);
  auto& b3 = br.branch();
  b.conv(b3, in, c3r, 1, 1, 0);
  b.conv(b3, c3r, c3, 3, 1, 1);
  b.conv(b3, c3, c3, 3, 1, 1);
  auto& bp = br.branch();
  bp.add<nn::AvgPool>(PoolGeometry{3, 1, 1});
  b.conv(bp, in, cp, 1, 1, 0);
  return c1 + c5 + c3 + cp;
}

int reduction_a(Builder& b, Sequential& seq, int in) {
  auto& br = seq.add<Branches>();
  const int c3 = b.ch(48), cdr = b.ch(16), cd = b.ch(24);
  b.conv(br.branch(), in, c3, 3, 2, 0);
  auto& bd = br.branch();
  b.conv(bd, in, cdr, 1, 1, 0);
  b.conv(bd, cdr, cd, 3, 1, 1);
  b.conv(bd, cd, cd, 3, 2, 0);
  br.branch().add<nn::MaxPool>(PoolGeometry{3, 2, 0});
  return c3 + cd + in;
}

int inception_c(Builder& b, Sequential& seq, int in, int c7_base) {
  auto& br = seq.add<Branches>();
  const int co = b.ch(48), c7 = b.ch(c7_base);
  b.conv(br.branch(), in, co, 1, 1, 0);
  auto& b7 = br.branch();
  b.conv(b7, in, c7, 1, 1, 0);
  b.conv(b7, c7, c7, Builder::rect(1, 7));
  b.conv(b7, c7, co, Builder::rect(7, 1));
  auto& bd = br.branch();
  b.conv(bd, in, c7, 1, 1, 0);
  b.conv(bd, c7, c7, Builder::rect(7, 1));
  b.conv(bd, c7, c7, Builder::rect(1, 7));
  b.conv(bd, c7, c7, Builder::rect(7, 1));
  b.conv(bd, c7, co, Builder::rect(1, 7));
  auto& bp = br.branch();
  bp.add<nn::AvgPool>(PoolGeometry{3, 1, 1});
  b.conv(bp, in, co, 1, 1, 0);
  return 4 * co;
}

int reduction_b(Builder& b, Sequential& seq, int in) {
  auto& br = seq.add<Branches>();
  const int cr = b.ch(48), c3 = b.ch(80), c7 = b.ch(48);
  auto& b3 = br.branch();
  b.conv(b3, in, cr, 1, 1, 0);
  b.conv(b3, cr, c3, 3, 2, 0);
  auto& b7 = br.branch();
  b.conv(b7, in, cr, 1, 1, 0);
  b.conv(b7, cr, cr, Builder::rect(1, 7));
  b.conv(b7, cr, cr, Builder::rect(7, 1));
  b.conv(b7, cr, c7, 3, 2, 0);
  br.branch().add<nn::MaxPool>(PoolGeometry{3, 2, 0});
  return c3 + c7 + in;
}

int split_1x3_3x1(Builder& b, Sequential& seq, int in, int out) {
  auto& br = seq.add<Branches>();
  b.conv(br.branch(), in, out, Builder::rect(1, 3));
  b.conv(br.branch(), in, out, Builder::rect(3, 1));
  return 2 * out;
}

int inception_e(Builder& b, Sequential& seq, int in) {
  auto& br = seq.add<Branches>();
  const int c1 = b.ch(80), c3r = b.ch(96), c3 = b.ch(96), cdr = b.ch(112), cp = b.ch(48);
  b.conv(br.branch(), in, c1, 1, 1, 0);
  auto& b3 = br.branch();
  b.conv(b3, in, c3r, 1, 1, 0);
  const int o3 = split_1x3_3x1(b, b3, c3r, c3);
  auto& bd = br.branch();
  b.conv(bd, in, cdr, 1, 1, 0);
  b.conv(bd, cdr, c3, 3, 1, 1);
  const int od = split_1x3_3x1(b, bd, c3, c3);
  auto& bp = br.branch();
  bp.add<nn::AvgPool>(PoolGeometry{3, 1, 1});
  b.conv(bp, in, cp, 1, 1, 0);
  return c1 + o3 + od + cp;
}

Backbone inceptionv3(Builder& b) {
  Backbone bb;
  auto& f = bb.features;
  const int s1 = b.ch(8), s2 = b.ch(16), s3 = b.ch(24), s4 = b.ch(32);
  b.conv(f, 3, s1, 3, 2, 0);
  b.conv(f, s1, s2, 3, 1, 0);
  f.add<nn::MaxPool>(PoolGeometry{3, 2, 0});
  b.conv(f, s2, s3, 1, 1, 0);
  b.conv(f, s3, s4, 3, 1, 0);
  f.add<nn::MaxPool>(PoolGeometry{3, 2, 0});
  int c = inception_a(b, f, s4, 8);
  c = inception_a(b, f, c, 16);
  c = inception_a(b, f, c, 16);
  c = reduction_a(b, f, c);
  c = inception_c(b, f, c, 16);
  c = inception_c(b, f, c, 24);
  c = reduction_b(b, f, c);
  c = inception_e(b, f, c);
  bb.feature_channels = c;
  return bb;
}

}  // namespace

Backbone build_backbone(const ArchitectureSpec& spec, Rng& rng) {
  spec.validate();
  Builder b(spec.width, rng);
  switch (spec.name) {
    case Architecture::kAlexNet: return alexnet(b);
    case Architecture::kResNet50: return resnet50(b);
    case Architecture::kInceptionV3: return inceptionv3(b);
    case Architecture::kSqueezeNet: return squeezenet(b);
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown architecture");
}

}  // namespace lungscope
