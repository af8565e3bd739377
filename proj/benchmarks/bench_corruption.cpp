// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "roma/corruption.hpp"
#include "roma/rng.hpp"

namespace {

roma::ImageBuffer random_image(uint64_t seed) {
  roma::ImageBuffer img(48, 48, 1);
  roma::Rng rng(seed);
  for (double& v : img.data) v = rng.uniform01();
  return img;
}

void BM_Apply(benchmark::State& state) {
  const auto kind = static_cast<roma::CorruptionKind>(state.range(0));
  const roma::ImageBuffer img = random_image(1);
  const roma::CorruptionSpec spec = roma::eval_spec(kind, 2, 7);
  for (auto _ : state) {
    const roma::ImageBuffer out = roma::apply(img, spec);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_Apply)->DenseRange(0, 8)->ArgNames({"kind"});

}  // namespace

BENCHMARK_MAIN();
