#include <benchmark/benchmark.h>

#include <random>

#include "hvf/autodiff.hpp"
#include "hvf/building_sim.hpp"
#include "hvf/layers.hpp"
#include "hvf/model.hpp"
#include "hvf/random.hpp"
#include "hvf/training.hpp"

namespace {

using namespace hvf;
using namespace hvf::ops;
using namespace hvf::kernels;

Tensor noise(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  return uniform_tensor(std::move(s), 1.0, rng);
}

void BM_Matmul(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Tensor a = noise({n, n}, 1), b = noise({n, n}, 2);
  for (auto _ : st) benchmark::DoNotOptimize(matmul(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(400);

void BM_LstmSequence(benchmark::State& st) {
  const auto steps = static_cast<std::size_t>(st.range(0));
  Rng rng(3);
  ParameterStore store;
  const LstmWeights w = make_lstm(store, "l", 32, 16, rng);
  const Tensor x = noise({steps, 32}, 4);
  for (auto _ : st) {
    Graph g(&store);
    Var y = lstm_sequence(g, g.constant(x), w, false);
    g.backward(sum(y));
    benchmark::DoNotOptimize(g.grad(g.param(w.bias)));
  }
}
BENCHMARK(BM_LstmSequence)->Arg(48)->Arg(672);

void BM_TinyModelStep(benchmark::State& st) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model m(cfg);
  const Tensor past = noise({cfg.n_past, cfg.past_features}, 5);
  const Tensor fut = noise({cfg.n_future, cfg.future_features}, 6);
  const Tensor y = noise({cfg.n_future, cfg.zones}, 7);
  Rng rng(8);
  for (auto _ : st) {
    Graph g(&m.params());
    Var loss = quantile_loss(g, m.forward(g, past, fut, true, rng), y, cfg.quantiles);
    g.backward(loss);
    g.write_parameter_grads(m.params());
    benchmark::DoNotOptimize(loss.value().item());
  }
}
BENCHMARK(BM_TinyModelStep)->Unit(benchmark::kMillisecond);

void BM_TinyModelInfer(benchmark::State& st) {
  const ModelConfig cfg = ModelConfig::tiny();
  const Model m(cfg);
  const Tensor past = noise({cfg.n_past, cfg.past_features}, 5);
  const Tensor fut = noise({cfg.n_future, cfg.future_features}, 6);
  for (auto _ : st) benchmark::DoNotOptimize(m.infer(past, fut));
}
BENCHMARK(BM_TinyModelInfer)->Unit(benchmark::kMillisecond);

void BM_SimulateDays(benchmark::State& st) {
  const auto days = static_cast<std::size_t>(st.range(0));
  const Calendar cal(*parse_date("2021-01-01"), days);
  const sim::BuildingSpec spec = sim::default_building();
  auto w = derive_rng({1, 1}), s = derive_rng({1, 2}), p = derive_rng({1, 3}), o = derive_rng({1, 4});
  const auto weather = sim::synth_weather(w, cal);
  const auto sched = sim::generate_schedules(s, cal, spec);
  const auto sp = sim::generate_mprs_setpoints(p, cal);
  const auto win = sim::generate_prbs_windows(o, cal, 0.05);
  for (auto _ : st) benchmark::DoNotOptimize(sim::simulate(spec, cal, weather, sched, sp, win));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(days * kStepsPerDay));
}
BENCHMARK(BM_SimulateDays)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
