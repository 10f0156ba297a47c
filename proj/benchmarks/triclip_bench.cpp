// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <array>
#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "triclip/loss.hpp"
#include "triclip/model.hpp"
#include "triclip/random_forest.hpp"
#include "triclip/rng.hpp"
#include "triclip/synth.hpp"
#include "triclip/viz.hpp"

namespace {

using triclip::EncoderConfig;
using triclip::Mat;

Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  triclip::Rng rng(seed);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_EncodeForward(benchmark::State& state) {
  EncoderConfig config;
  config.depth = static_cast<int>(state.range(0));
  const auto params = triclip::EncoderParams::init(config, 1);
  const Mat image = random_matrix(config.image_hw, config.image_hw, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(triclip::encode(config, params, image));
  }
}
BENCHMARK(BM_EncodeForward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_EncodeForwardBackward(benchmark::State& state) {
  EncoderConfig config;
  config.depth = static_cast<int>(state.range(0));
  const auto params = triclip::EncoderParams::init(config, 1);
  auto grads = triclip::EncoderParams::zeros(config);
  const Mat image = random_matrix(config.image_hw, config.image_hw, 2);
  triclip::Vec d = triclip::Vec::Ones(config.embed_dim);
  for (auto _ : state) {
    triclip::EncodeTrace trace;
    triclip::encode(config, params, image, &trace);
    triclip::encode_backward(config, params, trace, d, grads);
  }
}
BENCHMARK(BM_EncodeForwardBackward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MultimodalClipLoss(benchmark::State& state) {
  const auto n = state.range(0);
  std::array<Mat, triclip::kNumModalities> batches;
  for (int m = 0; m < triclip::kNumModalities; ++m) {
    batches[m] = random_matrix(n, 64, 10 + m).rowwise().normalized();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(triclip::multimodal_clip_loss_grad(batches, 0.07));
  }
}
BENCHMARK(BM_MultimodalClipLoss)->Arg(32)->Arg(256);

void BM_GenerateChip(benchmark::State& state) {
  std::int64_t id = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(triclip::generate_chip(7, id++, 64, 0.05));
  }
}
BENCHMARK(BM_GenerateChip)->Unit(benchmark::kMillisecond);

void BM_RandomForestFit(benchmark::State& state) {
  const auto n = state.range(0);
  const Mat X = random_matrix(n, 192, 3);
  std::vector<std::uint8_t> y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = X(i, 0) + 0.5 * X(i, 1) > 0.0 ? 1 : 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(triclip::rf_fit(X, y, 5));
  }
}
BENCHMARK(BM_RandomForestFit)->Arg(250)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Tsne(benchmark::State& state) {
  const auto n = state.range(0);
  const Mat X = random_matrix(n, 50, 4);
  triclip::TsneOptions options;
  options.iterations = 300;
  options.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(triclip::tsne(X, options));
  }
}
BENCHMARK(BM_Tsne)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
