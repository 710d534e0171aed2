#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "acbridge/demod.hpp"
#include "acbridge/features.hpp"
#include "acbridge/simulator.hpp"

using namespace acbridge;

namespace {

// 0.2 s of the default bridge, simulated once and shared by all benchmarks.
const WaveformRecord& record() {
  static const WaveformRecord rec = [] {
    SimConfig cfg = default_sim_config();
    cfg.duration = 0.2;
    cfg.noise_sigma = 1e-3;
    return simulate(cfg);
  }();
  return rec;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_WindowSums(benchmark::State& state) {
  const WaveformRecord& rec = record();
  const int n = 36, shift = 9;
  std::vector<double> quad(rec.size(), 0.0);
  for (std::size_t k = shift; k < rec.size(); ++k) quad[k] = rec.v_gen[k - shift];
  const std::size_t from = shift + n / 2, to = rec.size() - n / 2;
  for (auto _ : state) benchmark::DoNotOptimize(window_sums(rec.v_m, rec.v_gen, quad, n, from, to, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(to - from));
  label(state);
}

void BM_DemodulateAndInvert(benchmark::State& state) {
  const WaveformRecord& rec = record();
  DemodConfig cfg;
  cfg.f_gen = 20e3;
  cfg.v_hat = 6.0;
  const BridgeConfig bridge = reference_bridge();
  for (auto _ : state) {
    const RatioSeries r = demodulate(rec, cfg, exec_of(state));
    benchmark::DoNotOptimize(ratio_to_impedance(r, bridge, {}, cfg, exec_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rec.size()));
  label(state);
}

void BM_CentralFrequency(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> x(1 << 20);
  for (auto& v : x) v = g(rng);
  const FeatureWindow w{1024, 256, Taper::hann};
  for (auto _ : state) benchmark::DoNotOptimize(central_frequency(x, w, 1e3, {}, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
  label(state);
}

}  // namespace

BENCHMARK(BM_WindowSums)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DemodulateAndInvert)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CentralFrequency)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
