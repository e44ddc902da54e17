#include <benchmark/benchmark.h>

#include "valrl/agents.hpp"
#include "valrl/net.hpp"

namespace {

using namespace valrl::net;

Tensor random_input(std::size_t rows, std::size_t cols, valrl::Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.values()) v = rng.uniform();
  return t;
}

// Batch 32 through the default two-layer body; range(0) is the width.
void BM_MlpForward(benchmark::State& state) {
  valrl::Rng rng(1);
  const auto width = static_cast<std::size_t>(state.range(0));
  const MlpSpec spec{100, {width, width}, 3};
  const auto params = init_mlp(spec, rng);
  const auto x = random_input(32, 100, rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, spec, x));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(512);

void BM_MlpForwardBackward(benchmark::State& state) {
  valrl::Rng rng(2);
  const auto width = static_cast<std::size_t>(state.range(0));
  const MlpSpec spec{100, {width, width}, 3};
  const auto params = init_mlp(spec, rng);
  const auto x = random_input(32, 100, rng);
  const Tensor g = Tensor::matrix(32, 3, 1.0);
  for (auto _ : state) {
    Tape tape(params);
    const auto out = mlp_forward(tape, tape.input(x), spec);
    benchmark::DoNotOptimize(tape.backward(out, g));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(512);

void BM_CategoricalProjection(benchmark::State& state) {
  const valrl::agents::CategoricalConfig cfg{51, -10.0, 10.0};
  std::vector<double> p(51, 1.0 / 51.0);
  for (auto _ : state) benchmark::DoNotOptimize(valrl::agents::categorical_projection(cfg, p, 0.3, 0.99));
}
BENCHMARK(BM_CategoricalProjection);

}  // namespace
