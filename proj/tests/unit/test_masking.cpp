#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lsm/masking.hpp"

using namespace lsm;
using namespace lsm::masking;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Masked columns (time patches) of a plan, each as a count of masked patches.
std::vector<std::size_t> column_counts(const MaskPlan& p) {
  std::vector<std::size_t> c(p.grid.n_time_patches, 0);
  for (std::size_t t = 0; t < p.grid.n_time_patches; ++t) {
    for (std::size_t s = 0; s < p.grid.n_signal_patches; ++s) c[t] += p.masked[p.grid.patch_index(t, s)];
  }
  return c;
}

}  // namespace

TEST(Grid, DefaultGeometry) {
  const auto g = make_grid(10, 5);
  EXPECT_EQ(g.num_patches(), 180u);
  EXPECT_EQ(g.n_time_patches, 30u);
  EXPECT_EQ(g.n_signal_patches, 6u);
  EXPECT_EQ(g.padded_signal_count, 30u);
  const auto wide = make_grid(10, 26);
  EXPECT_EQ(wide.num_patches(), 30u);
  EXPECT_EQ(wide.padded_signal_count, 26u);
  EXPECT_THROW(make_grid(7, 5), InvalidArgument);
  EXPECT_THROW(make_grid(0, 5), InvalidArgument);
}

TEST(Patchify, RoundTripAndZeroPadding) {
  Rng rng(1);
  for (auto [pt, ps] : std::vector<std::pair<std::size_t, std::size_t>>{{10, 5}, {5, 5}, {10, 26}, {60, 4}, {1, 1}}) {
    const auto g = make_grid(pt, ps);
    const auto v = random_values(rng, kFrameCells);
    const auto p = patchify(v, g);
    EXPECT_EQ(p.size(), g.num_patches() * g.patch_dim());
    EXPECT_EQ(unpatchify(p, g), v);
    const auto real = real_cell_mask(g);
    double real_count = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (real[i] == 0.0) EXPECT_EQ(p[i], 0.0);
      real_count += real[i];
    }
    EXPECT_EQ(real_count, static_cast<double>(kFrameCells));
  }
}

TEST(Patchify, LayoutIsTimeMajor) {
  const auto g = make_grid(10, 5);
  // Signal 7, minute 23 -> time patch 2, signal patch 1, offset (7 % 5) * 10 + 3.
  const auto [p, off] = cell_to_patch(g, 7, 23);
  EXPECT_EQ(p, 2u * 6 + 1);
  EXPECT_EQ(off, 2u * 10 + 3);
}

TEST(PlanMask, RandomHitsExactCount) {
  const auto g = make_grid(10, 5);
  const auto p = plan_mask(g, Strategy::Random, 0.8, 3);
  EXPECT_EQ(p.masked_count(), 144u);
  EXPECT_DOUBLE_EQ(p.achieved_ratio, 0.8);
  EXPECT_THROW(plan_mask(g, Strategy::Random, 0.0, 1), InvalidArgument);
  EXPECT_THROW(plan_mask(g, Strategy::Random, 1.0, 1), InvalidArgument);
}

TEST(PlanMask, ExtrapolationMasksTrailingColumns) {
  const auto g = make_grid(10, 5);
  const auto p = plan_mask(g, Strategy::Extrapolation, 0.8, 3);
  const auto c = column_counts(p);
  for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(c[t], t >= 6 ? 6u : 0u) << t;
}

TEST(PlanMask, InterpolationIsOneInteriorBlock) {
  const auto g = make_grid(10, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (double r : {0.1, 0.5, 0.8}) {
      const auto c = column_counts(plan_mask(g, Strategy::Interpolation, r, seed));
      std::vector<std::size_t> cols;
      for (std::size_t t = 0; t < c.size(); ++t) {
        if (c[t] > 0) {
          EXPECT_EQ(c[t], 6u);
          cols.push_back(t);
        }
      }
      ASSERT_FALSE(cols.empty());
      EXPECT_EQ(cols.back() - cols.front() + 1, cols.size());
      EXPECT_GT(cols.front(), 0u);
      EXPECT_LT(cols.back(), 29u);
    }
  }
}

TEST(PlanMask, StructuredStrategiesFillWholeLinesFirst) {
  const auto g = make_grid(10, 5);
  const auto t = plan_mask(g, Strategy::StructuredTemporal, 0.8, 5);
  EXPECT_EQ(t.masked_count(), 144u);
  const auto c = column_counts(t);
  EXPECT_EQ(std::count(c.begin(), c.end(), 6u), 24);

  const auto s = plan_mask(g, Strategy::StructuredSensor, 0.5, 5);
  EXPECT_EQ(s.masked_count(), 90u);
  std::size_t full_rows = 0;
  for (std::size_t sp = 0; sp < 6; ++sp) {
    std::size_t n = 0;
    for (std::size_t tp = 0; tp < 30; ++tp) n += s.masked[g.patch_index(tp, sp)];
    full_rows += n == 30;
  }
  EXPECT_EQ(full_rows, 3u);
}

TEST(PlanMask, AchievedRatioWithinOneGranule) {
  Rng rng(2);
  for (auto strategy : {Strategy::Random, Strategy::StructuredTemporal, Strategy::StructuredSensor,
                        Strategy::Extrapolation, Strategy::Interpolation}) {
    for (int i = 0; i < 50; ++i) {
      const double r = rng.uniform(0.05, 0.95);
      const auto g = make_grid(10, 5);
      const auto p = plan_mask(g, strategy, r, rng.next_u64());
      EXPECT_NEAR(p.achieved_ratio, static_cast<double>(p.masked_count()) / 180.0, 1e-15);
      const double granule =
          (strategy == Strategy::Extrapolation || strategy == Strategy::Interpolation) ? 2.0 / 30.0 : 1.0 / 180.0;
      EXPECT_LE(std::fabs(p.achieved_ratio - r), granule) << strategy_name(strategy) << " " << r;
    }
  }
}

TEST(PlanMask, RandomPlansDifferAcrossSeeds) {
  const auto g = make_grid(10, 5);
  std::set<std::vector<std::uint8_t>> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(plan_mask(g, Strategy::Random, 0.8, s).masked);
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(plan_mask(g, Strategy::Random, 0.8, 9).masked, plan_mask(g, Strategy::Random, 0.8, 9).masked);
}

TEST(PlanMask, FromCellsHidesAnyTouchedPatch) {
  const auto g = make_grid(10, 5);
  std::vector<std::uint8_t> cells(kFrameCells, 0);
  cells[12 * kWindowMinutes + 45] = 1;
  const auto p = plan_from_cells(g, cells);
  EXPECT_EQ(p.masked_count(), 1u);
  EXPECT_EQ(p.masked[g.patch_index(4, 2)], 1);
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {Strategy::Random, Strategy::StructuredTemporal, Strategy::StructuredSensor,
                 Strategy::Extrapolation, Strategy::Interpolation}) {
    EXPECT_EQ(strategy_from_name(strategy_name(s)), s);
  }
  EXPECT_THROW(strategy_from_name("zigzag"), InvalidArgument);
}

TEST(Correlation, SelfDuplicateAndIndependence) {
  Rng rng(3);
  std::vector<frames::SensorFrame> frames(340);
  for (auto& f : frames) {
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      for (std::size_t m = 0; m < kWindowMinutes; ++m) f.at(s, m) = rng.normal();
    }
    for (std::size_t m = 0; m < kWindowMinutes; ++m) f.at(1, m) = 3.0 * f.at(0, m) + 1.0;
  }
  const auto c = correlation_matrix(frames);
  for (std::size_t i = 0; i < kNumSignals; ++i) {
    EXPECT_EQ(c.at(i, i), 1.0);
    for (std::size_t j = 0; j < kNumSignals; ++j) EXPECT_EQ(c.at(i, j), c.at(j, i));
  }
  EXPECT_NEAR(c.at(0, 1), 1.0, 1e-9);
  // About 1e5 samples per pair.
  for (std::size_t i = 2; i < kNumSignals; ++i) {
    for (std::size_t j = i + 1; j < kNumSignals; ++j) EXPECT_LT(std::fabs(c.at(i, j)), 0.05);
  }
}

TEST(Correlation, SkipsMissingAndFlagsDegenerate) {
  Rng rng(4);
  std::vector<frames::SensorFrame> frames(4);
  for (auto& f : frames) {
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      for (std::size_t m = 0; m < kWindowMinutes; ++m) f.at(s, m) = s == 9 ? 2.0 : rng.normal();
    }
    for (std::size_t m = 0; m < kWindowMinutes; ++m) {
      f.at(4, m) = f.at(3, m);
      if (m % 3 == 0) {
        f.at(4, m) = 1000.0;
        f.missing[4 * kWindowMinutes + m] = 1;
      }
    }
  }
  const auto c = correlation_matrix(frames);
  EXPECT_NEAR(c.at(3, 4), 1.0, 1e-9);
  EXPECT_EQ(c.defined[9], 0);
  EXPECT_EQ(c.defined[3], 1);
}

TEST(Order, ClusteredAndRandomized) {
  std::vector<double> corr(kNumSignals * kNumSignals, 0.0);
  const auto id = order_signals(corr, OrderPolicy::Clustered, 0);
  for (std::size_t i = 0; i < kNumSignals; ++i) EXPECT_EQ(id.permutation[i], i);
  const auto a = order_signals(corr, OrderPolicy::Randomized, 7);
  EXPECT_EQ(a.permutation, order_signals(corr, OrderPolicy::Randomized, 7).permutation);
  auto sorted = a.permutation;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, id.permutation);
}

TEST(Order, MinAdjacentSeparatesCorrelatedPair) {
  const std::vector<double> corr = {1.0, 0.9, 0.1, 0.9, 1.0, 0.1, 0.1, 0.1, 1.0};
  const auto o = order_signals(corr, OrderPolicy::MinAdjacentCorrelation, 0);
  ASSERT_EQ(o.permutation.size(), 3u);
  const auto pos0 = std::find(o.permutation.begin(), o.permutation.end(), 0u) - o.permutation.begin();
  const auto pos1 = std::find(o.permutation.begin(), o.permutation.end(), 1u) - o.permutation.begin();
  EXPECT_EQ(std::abs(pos0 - pos1), 2);
  // Brute force: the chosen order attains the minimum over all 6 permutations.
  std::vector<std::size_t> perm = {0, 1, 2};
  double best = 1e9;
  do best = std::min(best, adjacent_cost(corr, perm));
  while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_DOUBLE_EQ(adjacent_cost(corr, o.permutation), best);
  EXPECT_EQ(order_policy_from_name("max-entropy"), OrderPolicy::MinAdjacentCorrelation);
}

TEST(Order, GreedyNeverWorseThanIdentityOnRandomMatrices) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> corr(kNumSignals * kNumSignals, 0.0);
    for (std::size_t i = 0; i < kNumSignals; ++i) {
      corr[i * kNumSignals + i] = 1.0;
      for (std::size_t j = i + 1; j < kNumSignals; ++j) {
        corr[i * kNumSignals + j] = corr[j * kNumSignals + i] = rng.uniform(-1, 1);
      }
    }
    const auto o = order_signals(corr, OrderPolicy::MinAdjacentCorrelation, 0);
    std::vector<std::size_t> id(kNumSignals);
    std::iota(id.begin(), id.end(), std::size_t{0});
    EXPECT_LE(adjacent_cost(corr, o.permutation), adjacent_cost(corr, id));
    auto sorted = o.permutation;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, id);
  }
}

TEST(Order, ReorderFrameMovesValuesAndMask) {
  Rng rng(5);
  frames::SensorFrame f;
  for (std::size_t i = 0; i < kFrameCells; ++i) {
    f.values[i] = rng.normal();
    f.missing[i] = rng.bernoulli(0.2);
  }
  const auto perm = seeded_permutation(kNumSignals, 3);
  const auto r = reorder_frame(f, perm);
  for (std::size_t i = 0; i < kNumSignals; ++i) {
    for (std::size_t m = 0; m < kWindowMinutes; ++m) {
      EXPECT_EQ(r.at(i, m), f.at(perm[i], m));
      EXPECT_EQ(r.is_missing(i, m), f.is_missing(perm[i], m));
    }
  }
}
