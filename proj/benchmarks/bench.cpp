// Copyright 2026 The hspose Authors.
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

#include <benchmark/benchmark.h>

#include "hspose/encoder_config.hpp"
#include "hspose/neighbors.hpp"
#include "hspose/rng.hpp"

using namespace hspose;

namespace {

PointCloud cloud_of(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Points3 pts(n, 3);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-0.5, 0.5);
  return PointCloud(std::move(pts));
}

void BM_KnnKdTree(benchmark::State& state) {
  const auto pc = cloud_of(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(knn_points(pc, 10));
}
BENCHMARK(BM_KnnKdTree)->Arg(256)->Arg(1024)->Arg(4096);

void BM_KnnBruteForce(benchmark::State& state) {
  const auto pc = cloud_of(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(knn_bruteforce(pc, 10));
}
BENCHMARK(BM_KnnBruteForce)->Arg(256)->Arg(1024)->Arg(4096);

void BM_HsLayerForward(benchmark::State& state) {
  const Index n = state.range(0);
  const auto pc = cloud_of(n, 2);
  Rng rng(3);
  FeatureMap f(n, 16);
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1.0, 1.0);
  const auto layer = HSLayerParams::random(16, 16, 1, 10, 10, false, rng);
  for (auto _ : state) benchmark::DoNotOptimize(hs_layer_forward(pc, f, layer));
}
BENCHMARK(BM_HsLayerForward)->Arg(256)->Arg(1024);

// Encoder forward as the feature receptive field grows.
void BM_EncoderByNeighbors(benchmark::State& state) {
  const auto pc = cloud_of(512, 4);
  auto spec = default_encoder_spec();
  for (auto& l : spec.layers) l.m_rff = state.range(0);
  const auto cfg = build_encoder(spec, 5);
  for (auto _ : state) benchmark::DoNotOptimize(hs_encoder_forward(pc, cfg));
}
BENCHMARK(BM_EncoderByNeighbors)->Arg(3)->Arg(5)->Arg(10)->Arg(20)->Arg(40);

}  // namespace
BENCHMARK_MAIN();
