// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "gestura/encoder.hpp"
#include "synthetic_hand.hpp"

namespace {

// Streams of growing length: a raise held for `range(0)` seconds at 30 fps.
gestura::LandmarkStream held_raise(int seconds) {
  auto low = gestura::testing::open_hand();
  low.center = {0.5, 0.85, 0.0};
  auto up = gestura::testing::open_hand();
  up.center = {0.5, 0.35, 0.0};
  const int hold = seconds * 1000;
  return gestura::testing::make_stream({{0, low}, {300, up}, {300 + hold, up}, {600 + hold, low}, {1500 + hold, low}},
                                       33);
}

void BM_EncodeStream(benchmark::State& state) {
  const auto stream = held_raise(static_cast<int>(state.range(0)));
  const gestura::RuleThresholds th;
  for (auto _ : state) benchmark::DoNotOptimize(gestura::encode_stream(stream, th));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.frames.size()));
}
BENCHMARK(BM_EncodeStream)->Arg(2)->Arg(10)->Arg(60);

void BM_SerializeMatrix(benchmark::State& state) {
  const auto m = gestura::encode_stream(held_raise(10), gestura::RuleThresholds{}).front();
  for (auto _ : state) benchmark::DoNotOptimize(gestura::serialize_matrix(m));
}
BENCHMARK(BM_SerializeMatrix);

}  // namespace
