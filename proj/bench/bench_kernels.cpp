// Serial reference vs OpenMP kernels on a fixed synthetic batch.
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "distillrank/kernels.hpp"

using namespace distillrank;

namespace {

struct Fixture {
  MlpConfig config{{16, 32, 16, 1}, Activation::kRelu, 0.2, 1};
  ParameterSet params = initialize_parameters(config);
  std::vector<Matrix> groups;
  std::vector<std::size_t> batch;
  kernels::GroupLoss loss = [](std::size_t, std::span<const double> scores) {
    std::vector<double> w(scores.size(), 0.0);
    w[0] = 1.0;
    return listwise_ce(scores, LabelDistribution::from_weights(w));
  };

  explicit Fixture(std::size_t count) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t g = 0; g < count; ++g) {
      Matrix x(10, 16);
      for (auto& v : x.data) v = normal(rng);
      groups.push_back(std::move(x));
    }
    batch.resize(count);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
  }
};

void BM_GradientSerial(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::batch_gradient_serial(f.params, f.config.activation, f.groups, f.batch, f.loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GradientParallel(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::batch_gradient_parallel(f.params, f.config.activation, f.groups, f.batch, f.loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreSerial(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_groups_serial(f.params, f.config.activation, f.groups));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreParallel(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_groups_parallel(f.params, f.config.activation, f.groups));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Arg(64)->Arg(1024);
BENCHMARK(BM_GradientParallel)->Arg(64)->Arg(1024);
BENCHMARK(BM_ScoreSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ScoreParallel)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
