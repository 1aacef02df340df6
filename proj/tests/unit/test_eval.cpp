#include <gtest/gtest.h>

#include <cmath>

#include "lsm/eval.hpp"

using namespace lsm;
using namespace lsm::eval;

namespace {

const auto kGrid = masking::make_grid(10, 5);

std::vector<frames::SensorFrame> noisy_frames(std::size_t n, std::uint64_t seed, double missing_p = 0.05) {
  Rng rng(seed);
  std::vector<frames::SensorFrame> out(n);
  for (auto& f : out) {
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      double level = rng.normal();
      for (std::size_t m = 0; m < kWindowMinutes; ++m) {
        level += 0.1 * rng.normal();
        f.at(s, m) = level;
        f.missing[s * kWindowMinutes + m] = rng.bernoulli(missing_p);
      }
    }
  }
  return out;
}

std::size_t count(const std::vector<std::uint8_t>& m) {
  std::size_t n = 0;
  for (auto v : m) n += v;
  return n;
}

}  // namespace

TEST(TaskMask, ExtrapolationHidesTrailingHour) {
  GenTaskSpec s{GenTask::TemporalExtrapolation, 60};
  const auto m = make_task_mask(s, kGrid, 1);
  for (std::size_t sig = 0; sig < kNumSignals; ++sig) {
    for (std::size_t t = 0; t < kWindowMinutes; ++t) EXPECT_EQ(m[sig * kWindowMinutes + t], t >= 240 ? 1 : 0);
  }
}

TEST(TaskMask, SensorTaskHidesSeventeenRows) {
  EXPECT_EQ(sensor_task_signal_count(0.67), 17u);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GenTaskSpec s{GenTask::SensorImputation, 60};
    const auto m = make_task_mask(s, kGrid, seed);
    std::size_t rows = 0;
    for (std::size_t sig = 0; sig < kNumSignals; ++sig) {
      std::size_t n = 0, first = kWindowMinutes, last = 0;
      for (std::size_t t = 0; t < kWindowMinutes; ++t) {
        if (m[sig * kWindowMinutes + t]) {
          ++n;
          first = std::min(first, t);
          last = t;
        }
      }
      if (n > 0) {
        ++rows;
        EXPECT_EQ(n, 60u);
        EXPECT_EQ(last - first + 1, 60u);
      }
    }
    EXPECT_EQ(rows, 17u);
  }
}

TEST(TaskMask, InterpolationIsInteriorWithObservedNeighbours) {
  for (std::size_t d : {10, 20, 30, 60, 120, 7}) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      GenTaskSpec s{GenTask::TemporalInterpolation, d};
      const auto m = make_task_mask(s, kGrid, seed);
      EXPECT_EQ(count(m), d * kNumSignals);
      std::size_t first = kWindowMinutes, last = 0;
      for (std::size_t t = 0; t < kWindowMinutes; ++t) {
        if (m[t]) {
          first = std::min(first, t);
          last = t;
        }
      }
      EXPECT_EQ(last - first + 1, d);
      ASSERT_GT(first, 0u);
      ASSERT_LT(last, kWindowMinutes - 1);
      EXPECT_EQ(m[first - 1], 0);
      EXPECT_EQ(m[last + 1], 0);
      for (std::size_t sig = 1; sig < kNumSignals; ++sig) {
        EXPECT_TRUE(std::equal(m.begin(), m.begin() + kWindowMinutes, m.begin() + sig * kWindowMinutes));
      }
    }
  }
}

TEST(TaskMask, RandomTaskHidesWholePatches) {
  GenTaskSpec s{GenTask::RandomImputation, 0, 0.8};
  const auto m = make_task_mask(s, kGrid, 3);
  // 144 of 180 patches; the last signal patch covers one real row.
  std::size_t patches = 0;
  for (std::size_t tp = 0; tp < 30; ++tp) {
    for (std::size_t sp = 0; sp < 6; ++sp) patches += m[(sp * 5) * kWindowMinutes + tp * 10];
  }
  EXPECT_EQ(patches, 144u);
}

TEST(TaskMask, DurationBounds) {
  EXPECT_THROW(make_task_mask({GenTask::TemporalInterpolation, 300}, kGrid, 1), InvalidArgument);
  EXPECT_THROW(make_task_mask({GenTask::TemporalExtrapolation, 0}, kGrid, 1), InvalidArgument);
}

TEST(Metrics, WorkedExample) {
  const std::vector<double> truth{1, 2}, pred{1.5, 2.5};
  const auto [mae, mse] = error_metrics(truth, pred);
  EXPECT_DOUBLE_EQ(mae, 0.5);
  EXPECT_DOUBLE_EQ(mse, 0.25);
  EXPECT_THROW(error_metrics(truth, std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(error_metrics(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
}

TEST(EvalGenerative, PerfectImputerScoresZero) {
  const auto frames = noisy_frames(5, 1);
  Imputer oracle = [](const frames::SensorFrame& f, const std::vector<std::uint8_t>&) { return f.values; };
  const auto r = eval_generative(oracle, "oracle", frames, {{GenTask::TemporalInterpolation, 60}}, kGrid);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].mae, 0.0);
  EXPECT_EQ(r[0].mse, 0.0);
  EXPECT_GT(r[0].n, 0u);
}

TEST(EvalGenerative, LinearBaselineMatchesIndependentRecomputation) {
  const auto frames = noisy_frames(50, 2);
  const std::vector<GenTaskSpec> specs{{GenTask::TemporalInterpolation, 60, 0.8, 0.67, 11},
                                       {GenTask::SensorImputation, 30, 0.8, 0.67, 12},
                                       {GenTask::RandomImputation, 0, 0.8, 0.67, 13}};
  const auto got = eval_generative(baseline_imputer(baselines::ImputeMethod::Linear), "linear", frames, specs, kGrid);
  ASSERT_EQ(got.size(), specs.size());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    double ae = 0, se = 0;
    std::size_t n = 0;
    std::array<std::size_t, kNumSignals> per{};
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto mask = make_task_mask(specs[k], kGrid, derive_seed(specs[k].seed, i));
      for (std::size_t s = 0; s < kNumSignals; ++s) {
        // Row-local linear interpolation between the nearest unmasked minutes.
        for (std::size_t t = 0; t < kWindowMinutes; ++t) {
          const std::size_t c = s * kWindowMinutes + t;
          if (!mask[c] || frames[i].missing[c]) continue;
          long l = static_cast<long>(t), r = static_cast<long>(t);
          while (l >= 0 && mask[s * kWindowMinutes + l]) --l;
          while (r < static_cast<long>(kWindowMinutes) && mask[s * kWindowMinutes + r]) ++r;
          double pred;
          if (l < 0 && r >= static_cast<long>(kWindowMinutes)) {
            pred = 0.0;
          } else if (l < 0) {
            pred = frames[i].at(s, r);
          } else if (r >= static_cast<long>(kWindowMinutes)) {
            pred = frames[i].at(s, l);
          } else {
            const double w = static_cast<double>(static_cast<long>(t) - l) / static_cast<double>(r - l);
            pred = frames[i].at(s, l) * (1 - w) + frames[i].at(s, r) * w;
          }
          const double d = pred - frames[i].values[c];
          ae += std::fabs(d);
          se += d * d;
          ++n;
          ++per[s];
        }
      }
    }
    EXPECT_EQ(got[k].n, n);
    EXPECT_NEAR(got[k].mae, ae / n, 1e-12);
    EXPECT_NEAR(got[k].mse, se / n, 1e-12);
    EXPECT_EQ(got[k].signal_n, per);
    EXPECT_EQ(got[k].method, "linear");
  }
}

TEST(EvalGenerative, ImputersSeeTheSameMasks) {
  const auto frames = noisy_frames(8, 3);
  std::vector<std::vector<std::uint8_t>> seen_a, seen_b;
  auto spy = [](std::vector<std::vector<std::uint8_t>>& log) {
    return Imputer([&log](const frames::SensorFrame& f, const std::vector<std::uint8_t>& m) {
      log.push_back(m);
      return f.values;
    });
  };
  const std::vector<GenTaskSpec> specs{{GenTask::SensorImputation, 60, 0.8, 0.67, 4}};
  eval_generative(spy(seen_a), "a", frames, specs, kGrid);
  eval_generative(spy(seen_b), "b", frames, specs, kGrid);
  EXPECT_EQ(seen_a, seen_b);
  EXPECT_NE(seen_a[0], seen_a[1]);
}

TEST(EvalGenerative, ExtrapolationNearestEqualsLinear) {
  const auto frames = noisy_frames(20, 5);
  const std::vector<GenTaskSpec> specs{{GenTask::TemporalExtrapolation, 60}, {GenTask::TemporalExtrapolation, 120}};
  const auto a = eval_generative(baseline_imputer(baselines::ImputeMethod::Nearest), "nearest", frames, specs, kGrid);
  const auto b = eval_generative(baseline_imputer(baselines::ImputeMethod::Linear), "linear", frames, specs, kGrid);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    EXPECT_EQ(a[k].mae, b[k].mae);
    EXPECT_EQ(a[k].mse, b[k].mse);
  }
}

TEST(EvalGenerative, ExcludesCellsMissingAtSource) {
  auto frames = noisy_frames(1, 6, 0.0);
  for (std::size_t t = 0; t < kWindowMinutes; ++t) frames[0].missing[t] = 1;
  const auto r = eval_generative(baseline_imputer(baselines::ImputeMethod::Mean), "mean", frames,
                                 {{GenTask::TemporalExtrapolation, 60}}, kGrid);
  EXPECT_EQ(r[0].n, 25u * 60);
  EXPECT_EQ(r[0].signal_n[0], 0u);
}

TEST(EvalGenerative, EmptyTestSetRejected) {
  EXPECT_THROW(eval_generative(baseline_imputer(baselines::ImputeMethod::Mean), "mean", {},
                               {{GenTask::TemporalInterpolation, 60}}, kGrid),
               InvalidArgument);
}

TEST(EvalGenerative, ModelImputerKeepsObservedCells) {
  auto net = std::make_shared<const model::MaeModel>(model::variant("tiny"), 1);
  const auto frames = noisy_frames(1, 7);
  const auto mask = make_task_mask({GenTask::TemporalInterpolation, 60}, kGrid, 2);
  const auto out = model_imputer(net)(frames[0], mask);
  std::size_t changed = 0;
  for (std::size_t c = 0; c < kFrameCells; ++c) {
    if (!mask[c]) {
      EXPECT_EQ(out[c], frames[0].values[c]);
    } else {
      changed += out[c] != frames[0].values[c];
    }
  }
  EXPECT_GT(changed, 0u);
}

TEST(Tasks, NamesRoundTrip) {
  for (auto t : {GenTask::RandomImputation, GenTask::TemporalInterpolation, GenTask::SensorImputation,
                 GenTask::TemporalExtrapolation}) {
    EXPECT_EQ(task_from_name(task_name(t)), t);
  }
  EXPECT_THROW(task_from_name("teleport"), InvalidArgument);
}
