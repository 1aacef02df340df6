#include <benchmark/benchmark.h>

#include "lsm/features.hpp"
#include "lsm/synth.hpp"

namespace {

using namespace lsm;

void BM_FeaturizeWindow(benchmark::State& state) {
  const auto subjects = synth::gen_population(1, 3);
  const auto raw = synth::gen_raw_window(subjects[0], 600);
  for (auto _ : state) benchmark::DoNotOptimize(features::featurize_window(raw).size());
}
BENCHMARK(BM_FeaturizeWindow)->Unit(benchmark::kMillisecond);

void BM_GenRawWindow(benchmark::State& state) {
  const auto subjects = synth::gen_population(1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(synth::gen_raw_window(subjects[0], 600).accel_x.size());
}
BENCHMARK(BM_GenRawWindow)->Unit(benchmark::kMillisecond);

void BM_HrvMinute(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> rr(350);
  for (auto& v : rr) v = 850.0 + 40.0 * rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(features::hrv_metrics(rr).rmssd);
}
BENCHMARK(BM_HrvMinute);

void BM_BandpassMinute(benchmark::State& state) {
  Rng rng(6);
  std::vector<double> x(1500);
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(features::bandpass_second_order(x, 0.5, 11.0, 25.0).back());
}
BENCHMARK(BM_BandpassMinute);

}  // namespace
