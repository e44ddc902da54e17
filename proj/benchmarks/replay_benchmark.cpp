#include <benchmark/benchmark.h>

#include "valrl/replay.hpp"

namespace {

using valrl::Rng;
using valrl::replay::SumTree;

void BM_SumTreeUpdate(benchmark::State& state) {
  SumTree tree(static_cast<std::size_t>(state.range(0)));
  Rng rng(1);
  for (auto _ : state) tree.set_priority(rng.uniform_index(tree.capacity()), rng.uniform());
}
BENCHMARK(BM_SumTreeUpdate)->Range(1 << 10, 1 << 20);

void BM_SumTreeStratified32(benchmark::State& state) {
  SumTree tree(static_cast<std::size_t>(state.range(0)));
  Rng rng(2);
  for (std::size_t i = 0; i < tree.capacity(); ++i) tree.set_priority(i, rng.uniform());
  for (auto _ : state) benchmark::DoNotOptimize(tree.stratified_sample(32, rng));
}
BENCHMARK(BM_SumTreeStratified32)->Range(1 << 10, 1 << 20);

valrl::replay::TransitionStore filled_store(std::size_t stack, std::size_t n) {
  valrl::replay::StoreConfig c;
  c.capacity = 100000;
  c.frame_width = 10;
  c.frame_height = 10;
  c.stack_size = stack;
  c.update_horizon = n;
  valrl::replay::TransitionStore store(c);
  Rng rng(3);
  valrl::envs::Frame f(10, 10);
  for (std::size_t i = 0; i < c.capacity + 123; ++i) {
    f.mutable_pixels()[i % 100] = static_cast<std::uint8_t>(i);
    store.add(f, static_cast<int>(i % 3), rng.uniform(), rng.bernoulli(0.02));
  }
  return store;
}

void BM_SampleUniform(benchmark::State& state) {
  const auto store = filled_store(static_cast<std::size_t>(state.range(0)), 3);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(store.sample_uniform(32, rng));
}
BENCHMARK(BM_SampleUniform)->Arg(1)->Arg(4);

void BM_SamplePrioritized(benchmark::State& state) {
  const auto store = filled_store(static_cast<std::size_t>(state.range(0)), 3);
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(store.sample_prioritized(32, rng));
}
BENCHMARK(BM_SamplePrioritized)->Arg(1)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
