#include <benchmark/benchmark.h>

#include "ucvme/ucvme.hpp"

using namespace ucvme;

namespace {

MlpConfig bench_config(std::size_t width) {
  MlpConfig c;
  c.input_dim = 4;
  c.hidden_dims = {width, width};
  c.dropout_p = 0.05;
  return c;
}

Matrix bench_input(std::size_t rows, std::size_t cols) {
  Rng rng(1);
  Matrix x(rows, cols);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  return x;
}

void BM_Forward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const MlpModel m = init_model(bench_config(width), rng);
  const Matrix x = bench_input(64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x, rng));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128);

void BM_ForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  MlpModel m = init_model(bench_config(width), rng);
  const Matrix x = bench_input(64, 4);
  const Vector dy(64, 0.1), dz(64, -0.05);
  for (auto _ : state) {
    const ForwardTrace t = forward(m, x, rng);
    benchmark::DoNotOptimize(backward(m, t, dy, dz));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_PseudoLabels(benchmark::State& state) {
  const auto t_draws = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const MlpModel a = init_model(bench_config(64), rng);
  const MlpModel b = init_model(bench_config(64), rng);
  const Matrix x = bench_input(64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(generate_pseudo_labels(a, b, x, t_draws, rng));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_PseudoLabels)->Arg(1)->Arg(5)->Arg(20);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig c;
  c.variant = static_cast<Variant>(state.range(0));
  TrainState s = TrainState::initial(c, 4);
  const Matrix xl = bench_input(16, 4), xu = bench_input(64, 4);
  const Vector yl(16, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(s, xl, yl, xu, c));
  state.SetLabel(to_string(c.variant));
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 3);

void BM_HeteroLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Vector y(n), z(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.standard_normal();
    z[i] = rng.uniform(-1.0, 1.0);
    t[i] = rng.standard_normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(hetero_loss(y, z, t));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_HeteroLoss)->Arg(64)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
