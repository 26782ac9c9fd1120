#include <benchmark/benchmark.h>

#include "cflab/gratings.hpp"
#include "cflab/model.hpp"
#include "cflab/stats.hpp"
#include "cflab/training.hpp"

using namespace cflab;

namespace {

Matrix random_inputs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 100);
  Matrix x(n, kInputDim);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

std::vector<std::uint8_t> random_labels(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 101);
  std::vector<std::uint8_t> y(n);
  for (auto& v : y) v = rng.bernoulli(0.5) ? 1 : 0;
  return y;
}

void BM_RenderGrating(benchmark::State& state) {
  Rng rng(1, 0);
  for (auto _ : state) {
    const GratingParams p{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform()};
    benchmark::DoNotOptimize(render_grating(p));
  }
}
BENCHMARK(BM_RenderGrating);

void BM_SampleTaskDataset(benchmark::State& state) {
  GratingTask task;
  task.cat0 = {{0.4, 0.5}, kDefaultSigma2};
  task.cat1 = {{0.6, 0.5}, kDefaultSigma2};
  Rng rng(2, 0);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_task_dataset(task, n, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleTaskDataset)->Arg(1000);

void BM_TrainStep(benchmark::State& state) {
  Rng rng(3, 0);
  auto p = init_params(rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_inputs(n, 4);
  const auto y = random_labels(n, 5);
  ModelWorkspace ws;
  const double lr = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grad(p, x, y, true, ws));
    for (int i = 0; i < kParamCount; ++i)
      p.theta[static_cast<std::size_t>(i)] -= lr * ws.grad[static_cast<std::size_t>(i)];
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(128);

void BM_EvalLoss(benchmark::State& state) {
  Rng rng(6, 0);
  auto p = init_params(rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_inputs(n, 7);
  const auto y = random_labels(n, 8);
  ModelWorkspace ws;
  for (auto _ : state) benchmark::DoNotOptimize(eval_loss(p, x, y, ws));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvalLoss)->Arg(1000);

void BM_Pearson(benchmark::State& state) {
  Rng rng(9, 0);
  std::vector<double> a(30), b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = rng.uniform(0.0, 1.0);
    b[i] = a[i] + rng.gaussian(0.0, 0.1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pearson(a, b));
}
BENCHMARK(BM_Pearson);

}  // namespace

BENCHMARK_MAIN();
