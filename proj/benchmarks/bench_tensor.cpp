#include <benchmark/benchmark.h>

#include "lsm/model.hpp"
#include "lsm/tensor.hpp"

namespace {

using namespace lsm;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  auto a = ag::Tensor::parameter({m, k}, noise(m * k, 1));
  auto b = ag::Tensor::parameter({k, n}, noise(k * n, 2));
  for (auto _ : state) {
    auto y = ag::sum(ag::matmul(a, b));
    y.backward();
    benchmark::DoNotOptimize(a.grad().data());
    a.zero_grad();
    b.zero_grad();
  }
  state.counters["GFLOP/s"] = benchmark::Counter(6.0 * static_cast<double>(m * k * n) * 1e-9,
                                                 benchmark::Counter::kIsIterationInvariantRate);
}
// Decoder MLP and encoder qkv shapes of the tiny model at batch 16.
BENCHMARK(BM_Matmul)->Args({2880, 128, 512})->Args({576, 192, 576})->Unit(benchmark::kMillisecond);

void BM_Attention(benchmark::State& state) {
  const std::size_t batch = 16, tokens = static_cast<std::size_t>(state.range(0)), d = 128, heads = 4;
  auto qkv = ag::Tensor::parameter({batch * tokens, 3 * d}, noise(batch * tokens * 3 * d, 3));
  for (auto _ : state) {
    auto y = ag::sum(ag::attention(qkv, batch, tokens, heads));
    y.backward();
    qkv.zero_grad();
  }
}
BENCHMARK(BM_Attention)->Arg(36)->Arg(180)->Unit(benchmark::kMillisecond);

void BM_LayerNormGelu(benchmark::State& state) {
  const std::size_t rows = 2880, d = 128;
  auto x = ag::Tensor::parameter({rows, d}, noise(rows * d, 4));
  auto g = ag::Tensor::parameter({d}, std::vector<double>(d, 1.0));
  auto b = ag::Tensor::parameter({d}, std::vector<double>(d, 0.0));
  for (auto _ : state) {
    auto y = ag::sum(ag::gelu(ag::layer_norm(x, g, b)));
    y.backward();
    x.zero_grad();
  }
}
BENCHMARK(BM_LayerNormGelu)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  model::MaeModel m(model::variant("tiny"), 1);
  std::vector<frames::SensorFrame> frames(batch);
  for (std::size_t i = 0; i < batch; ++i) frames[i].values = noise(kFrameCells, 10 + i);
  std::vector<const frames::SensorFrame*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  const auto b = model::make_batch(ptrs, m.grid(), masking::Strategy::Random, 0.8, {}, 7);
  for (auto _ : state) {
    auto out = m.forward(b);
    out.loss.backward();
    for (const auto& p : m.params()) {
      auto t = p.tensor;
      t.zero_grad();
    }
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  model::MaeModel m(model::variant("tiny"), 1);
  std::vector<frames::SensorFrame> frames(16);
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i].values = noise(kFrameCells, 10 + i);
  std::vector<const frames::SensorFrame*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  const auto b = model::make_batch(ptrs, m.grid(), masking::Strategy::Random, 0.8, {}, 7);
  ag::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(b).loss.item());
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

}  // namespace
