// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "datasets.hpp"
#include "gestura/tuner.hpp"

namespace {

void BM_GridSearchFlexion(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const auto data = gestura::testing::planted_flexion(rng, static_cast<std::size_t>(state.range(0)), 65.0, 1.0);
  gestura::GridSpec grid;
  grid.flexion_finger = {{0, 180, 2}, {0, 180, 2}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(gestura::grid_search(data, gestura::ParamGroup::FlexionFinger, grid));
  }
}
BENCHMARK(BM_GridSearchFlexion)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_GridSearchContactJobs(benchmark::State& state) {
  std::mt19937_64 rng(8);
  const auto data = gestura::testing::planted_contact(rng, 500, 0.05, 0.001);
  gestura::GridSpec grid;
  grid.contact = {{0.0, 0.2, 0.002}, {0.0, 0.2, 0.002}};
  const auto jobs = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gestura::grid_search(data, gestura::ParamGroup::Contact, grid, {}, {}, jobs));
  }
}
BENCHMARK(BM_GridSearchContactJobs)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
