#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "lsm/common.hpp"

using namespace lsm;

TEST(Activity, NamesRoundTrip) {
  for (int i = 0; i <= kNumActivities; ++i) {
    const auto a = static_cast<Activity>(i);
    EXPECT_EQ(activity_from_name(activity_name(a)), a);
  }
  EXPECT_EQ(activity_from_name("none"), Activity::None);
  EXPECT_THROW(activity_from_name("Skydiving"), InvalidArgument);
}

TEST(Activity, ClassIndexIsZeroBasedOverEightClasses) {
  EXPECT_EQ(activity_class_index(Activity::None), -1);
  for (int c = 0; c < kNumActivities; ++c) EXPECT_EQ(activity_class_index(activity_from_index(c)), c);
  EXPECT_THROW(activity_from_index(8), InvalidArgument);
  EXPECT_THROW(activity_from_index(-1), InvalidArgument);
}

TEST(Seeds, DeriveSeedSeparatesTags) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(42, t));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 1));
}

TEST(Rng, UniformIntStaysInRangeAndCoversIt) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_int(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_THROW(rng.uniform_int(0), InvalidArgument);
}

TEST(Rng, NormalMomentsMatchStandardGaussian) {
  Rng rng(11);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    ss += x * x;
  }
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  // Standard errors are about 0.0022 and 0.0032.
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.015);
}

TEST(Rng, SerializeRestoresTheStream) {
  Rng a(99);
  for (int i = 0; i < 17; ++i) a.normal();
  const auto state = a.serialize();
  Rng b(0);
  b.deserialize(state);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.next_u64(), b.next_u64());
  }
  EXPECT_THROW(b.deserialize("garbage"), SchemaError);
}

TEST(Rng, SeededPermutationIsAPermutation) {
  auto p = seeded_permutation(100, 5);
  EXPECT_EQ(p, seeded_permutation(100, 5));
  EXPECT_NE(p, seeded_permutation(100, 6));
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}
