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

#include <random>

#include <benchmark/benchmark.h>

#include "lungscope/nn/kernels.hpp"

using namespace lungscope::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(n, c, h, w);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

// args: channels in, channels out, spatial size, kernel
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({3, 8, 112, 3})->Args({8, 16, 56, 3})->Args({16, 32, 28, 3})->Args({32, 64, 28, 1})->Args({3, 16, 244, 11});
}

ConvGeometry geometry(int k) { return ConvGeometry{k, k, k == 11 ? 4 : 1, k / 2, k / 2}; }

void BM_ConvForwardParallel(benchmark::State& state) {
  const int ci = static_cast<int>(state.range(0)), co = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const Tensor x = random_tensor(1, ci, s, s, 1);
  const Tensor w = random_tensor(co, ci, k, k, 2);
  const std::vector<double> bias(co, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(x, w, bias, geometry(k)));
}

void BM_ConvForwardReference(benchmark::State& state) {
  const int ci = static_cast<int>(state.range(0)), co = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const Tensor x = random_tensor(1, ci, s, s, 1);
  const Tensor w = random_tensor(co, ci, k, k, 2);
  const std::vector<double> bias(co, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward(x, w, bias, geometry(k)));
}

void BM_ConvBackwardParallel(benchmark::State& state) {
  const int ci = static_cast<int>(state.range(0)), co = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const ConvGeometry g = geometry(k);
  const Tensor x = random_tensor(1, ci, s, s, 1);
  const Tensor w = random_tensor(co, ci, k, k, 2);
  const Tensor gy = random_tensor(1, co, g.out_h(s), g.out_w(s), 3);
  Tensor gw = Tensor::like(w);
  std::vector<double> gb(co);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::conv2d_backward_input(gy, w, g, s, s));
    kernels::conv2d_backward_params(x, gy, g, gw, gb);
  }
}

void BM_ConvBackwardReference(benchmark::State& state) {
  const int ci = static_cast<int>(state.range(0)), co = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const ConvGeometry g = geometry(k);
  const Tensor x = random_tensor(1, ci, s, s, 1);
  const Tensor w = random_tensor(co, ci, k, k, 2);
  const Tensor gy = random_tensor(1, co, g.out_h(s), g.out_w(s), 3);
  Tensor gw = Tensor::like(w);
  std::vector<double> gb(co);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::conv2d_backward_input(gy, w, g, s, s));
    reference::conv2d_backward_params(x, gy, g, gw, gb);
  }
}

void BM_GemmParallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor a = random_tensor(1, 1, n, n, 4);
  const Tensor b = random_tensor(1, 1, n, n, 5);
  Tensor c(1, 1, n, n);
  for (auto _ : state) kernels::gemm(n, n, n, a.data(), b.data(), c.data(), false);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * n * n);
}

}  // namespace

BENCHMARK(BM_ConvForwardParallel)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardReference)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParallel)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardReference)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
