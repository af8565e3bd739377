// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "roma/policy.hpp"
#include "roma/task.hpp"

namespace {

struct Fixture {
  roma::PolicyConfig cfg;
  roma::ParamSet params;
  roma::TaskInstance inst;
  roma::ImageBuffer img;
  Fixture()
      : params(roma::init_params(cfg, 7)),
        inst(roma::generate(1)),
        img(roma::render(inst)) {}
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_ForwardTeacherForced(benchmark::State& state) {
  Fixture& f = fixture();
  const std::vector<int> prefix = {3};
  for (auto _ : state) {
    const roma::Tensor rows = roma::answer_rows(f.params, f.cfg, f.img, f.inst.question, prefix);
    benchmark::DoNotOptimize(rows.data.data());
  }
}
BENCHMARK(BM_ForwardTeacherForced);

void BM_ForwardBackward(benchmark::State& state) {
  Fixture& f = fixture();
  const std::vector<int> prefix = {3};
  for (auto _ : state) {
    roma::Tape tape;
    const roma::Var rows =
        roma::build_answer_rows(tape, f.params, f.cfg, f.img, f.inst.question, prefix);
    tape.backward(tape.sum(rows), f.params);
    benchmark::DoNotOptimize(f.params.grad("head.w").data.data());
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_SampleRollout(benchmark::State& state) {
  Fixture& f = fixture();
  uint64_t i = 0;
  for (auto _ : state) {
    roma::Rng rng(i++);
    const roma::Trajectory traj =
        roma::sample_rollout(f.params, f.cfg, f.img, f.inst.question, 1.0, 4, rng);
    benchmark::DoNotOptimize(traj.tokens.data());
  }
}
BENCHMARK(BM_SampleRollout);

}  // namespace

BENCHMARK_MAIN();
