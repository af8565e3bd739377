// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "roma/autograd.hpp"
#include "roma/rng.hpp"

namespace {

roma::Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed) {
  roma::Tensor t(std::move(shape));
  roma::Rng rng(seed);
  for (double& v : t.data) v = rng.gaussian();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  const roma::Tensor a = random_tensor({n, n}, 1);
  const roma::Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    roma::Tape t(false);
    auto out = t.matmul(t.constant(a), t.constant(b));
    benchmark::DoNotOptimize(t.value(out).data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const int64_t n = state.range(0);
  const roma::Tensor a = random_tensor({n, n}, 1);
  const roma::Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    roma::Tape t;
    auto va = t.leaf(a, true);
    auto vb = t.leaf(b, true);
    auto loss = t.sum(t.matmul(va, vb));
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(va).data.data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_Softmax(benchmark::State& state) {
  const roma::Tensor a = random_tensor({64, 64}, 3);
  for (auto _ : state) {
    roma::Tape t(false);
    auto out = t.softmax(t.constant(a));
    benchmark::DoNotOptimize(t.value(out).data.data());
  }
}
BENCHMARK(BM_Softmax);

}  // namespace

BENCHMARK_MAIN();
