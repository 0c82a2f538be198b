#include <benchmark/benchmark.h>

#include <set>
#include <vector>

#include "yieldnet/baselines.hpp"
#include "yieldnet/model.hpp"
#include "yieldnet/ops.hpp"
#include "yieldnet/rng.hpp"
#include "yieldnet/synthetic.hpp"
#include "yieldnet/training.hpp"

using namespace yieldnet;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(ad::element_count(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<SequenceSample> fixture_samples() {
  SyntheticSpec spec;
  spec.counties = 20;
  spec.start_year = 1980;
  spec.end_year = 1990;
  auto data = gen_synthetic(spec);
  auto avg = compute_avg_yields(data.records, Crop::corn);
  std::set<int> targets;
  for (int y = 1985; y <= 1990; ++y) targets.insert(y);
  return assemble_sequences(data.records, Crop::corn, 5, targets, Phase::train, avg).samples;
}

}  // namespace

// First weather layer on a batch: [B, 6, 52] -> [B, 8, 52].
static void BM_Conv1d(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor({b, 6, 52}, 1);
  auto w = random_tensor({8, 6, 3}, 2);
  auto bias = random_tensor({8}, 3);
  for (auto _ : state) {
    ad::Tape tape;
    auto y = ad::conv1d(tape.input(x), tape.input(w), tape.input(bias));
    benchmark::DoNotOptimize(y.value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(b));
}
BENCHMARK(BM_Conv1d)->Arg(1)->Arg(25);

static void BM_LstmStep(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor({b, 120}, 4);
  auto h = random_tensor({b, 64}, 5);
  auto c = random_tensor({b, 64}, 6);
  auto w = random_tensor({256, 184}, 7);
  auto bias = random_tensor({256}, 8);
  for (auto _ : state) {
    ad::Tape tape;
    auto s = ad::lstm_cell_step(tape.input(x), tape.input(h), tape.input(c),
                                ad::LstmParams{tape.input(w), tape.input(bias)});
    benchmark::DoNotOptimize(s.h.value().data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(1)->Arg(25);

// Forward and backward over one 25-sample batch of the corn network.
static void BM_BatchForwardBackward(benchmark::State& state) {
  const auto samples = fixture_samples();
  auto model = build_cnn_rnn(CnnRnnConfig::for_crop(Crop::corn), 42);
  auto inputs = model.inputs.prepare(samples);
  std::vector<const ModelInput*> batch;
  for (std::size_t i = 0; i < 25; ++i) batch.push_back(&inputs[i % inputs.size()]);
  for (auto _ : state) {
    ad::Tape tape;
    auto graph = cnn_rnn_graph(tape, model, batch);
    tape.backward(graph.predictions.back(), std::vector<double>(batch.size(), 1.0 / 25.0));
    benchmark::DoNotOptimize(tape.grad(graph.params.front()).data());
  }
}
BENCHMARK(BM_BatchForwardBackward)->Unit(benchmark::kMillisecond);

static void BM_TrainIterations(benchmark::State& state) {
  const auto samples = fixture_samples();
  TrainConfig config;
  config.max_iters = 10;
  for (auto _ : state) {
    auto model = build_cnn_rnn(CnnRnnConfig::for_crop(Crop::corn), 42);
    auto report = train_cnn_rnn(model, samples, config);
    benchmark::DoNotOptimize(report.batch_losses.data());
  }
}
BENCHMARK(BM_TrainIterations)->Unit(benchmark::kMillisecond);

static void BM_ForestFit(benchmark::State& state) {
  Rng rng(9);
  std::vector<std::vector<double>> x(300, std::vector<double>(422));
  std::vector<double> y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double& v : x[i]) v = rng.normal();
    y[i] = 2 * x[i][30] - x[i][200] + rng.normal(0, 0.1);
  }
  ForestConfig config;
  config.n_trees = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto forest = fit_random_forest(x, y, config);
    benchmark::DoNotOptimize(forest.trees.data());
  }
}
BENCHMARK(BM_ForestFit)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
