// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gestura/rules.hpp"
#include "synthetic_hand.hpp"

namespace {

std::vector<gestura::HandLandmarkFrame> frames(std::size_t n) {
  std::mt19937_64 rng(1);
  gestura::testing::RandomHandOptions opt;
  opt.chaos_fraction = 0.0;
  std::vector<gestura::HandLandmarkFrame> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(gestura::testing::random_hand(rng, opt));
  return out;
}

void BM_PoseVector(benchmark::State& state) {
  const auto fs = frames(256);
  const gestura::RuleThresholds th;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gestura::encode_pose_vector(fs[i++ % fs.size()], th));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PoseVector);

void BM_Proximity(benchmark::State& state) {
  const auto fs = frames(256);
  const gestura::RuleThresholds th;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gestura::proximity(fs[i++ % fs.size()], gestura::FingerPair::MiddleRing, th));
  }
}
BENCHMARK(BM_Proximity);

void BM_PalmOrientation(benchmark::State& state) {
  const auto fs = frames(256);
  const gestura::RuleThresholds th;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gestura::palm_orientation(fs[i++ % fs.size()], th));
}
BENCHMARK(BM_PalmOrientation);

}  // namespace

BENCHMARK_MAIN();
