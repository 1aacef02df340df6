#include <gtest/gtest.h>

#include <cstring>

#include "impute_oracle.hpp"
#include "lsm/baselines.hpp"
#include "lsm/masking.hpp"

using namespace lsm;
using namespace lsm::baselines;

namespace {

std::vector<double> fill(std::vector<double> v, std::vector<std::uint8_t> h, ImputeMethod m) {
  return impute(v, h, m, 1, v.size()).values;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Impute, WorkedExamples) {
  const std::vector<double> v{1, 0, 0, 4};
  const std::vector<std::uint8_t> h{0, 1, 1, 0};
  EXPECT_EQ(fill(v, h, ImputeMethod::Linear), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(fill(v, h, ImputeMethod::Nearest), (std::vector<double>{1, 1, 4, 4}));
  EXPECT_EQ(fill(v, h, ImputeMethod::Mean), (std::vector<double>{1, 2.5, 2.5, 4}));
  EXPECT_EQ(fill(v, h, ImputeMethod::Zero), (std::vector<double>{1, 0, 0, 4}));
  EXPECT_EQ(fill({5, 0, 0}, {0, 1, 1}, ImputeMethod::Linear), (std::vector<double>{5, 5, 5}));
  EXPECT_EQ(fill({0, 0, 2}, {1, 1, 0}, ImputeMethod::Nearest), (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(fill({1, 0, 3}, {0, 1, 0}, ImputeMethod::Nearest), (std::vector<double>{1, 1, 3}));
}

TEST(Impute, FullyHiddenRowFallsBackToZeroAndIsFlagged) {
  std::vector<double> v{7, 8, 1, 2};
  std::vector<std::uint8_t> h{1, 1, 0, 0};
  for (auto m : {ImputeMethod::Mean, ImputeMethod::Nearest, ImputeMethod::Linear}) {
    const auto r = impute(v, h, m, 2, 2);
    EXPECT_EQ(r.values[0], 0.0);
    EXPECT_EQ(r.values[1], 0.0);
    EXPECT_EQ(r.zero_filled_rows, (std::vector<std::uint8_t>{1, 0}));
  }
  EXPECT_THROW(impute(v, h, ImputeMethod::Mean, 3, 2), InvalidArgument);
}

TEST(Impute, MatchesBruteForceOnRandomMasks) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t rows = 1 + rng.uniform_int(6), cols = 1 + rng.uniform_int(40);
    std::vector<double> v(rows * cols);
    std::vector<std::uint8_t> h(rows * cols);
    const double p = rng.uniform();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = rng.normal() * 10.0;
      h[i] = rng.bernoulli(p);
    }
    for (auto m : {ImputeMethod::Mean, ImputeMethod::Nearest, ImputeMethod::Linear, ImputeMethod::Zero}) {
      const auto got = impute(v, h, m, rows, cols).values;
      EXPECT_TRUE(bit_equal(got, testkit::oracle_impute(v, h, m, rows, cols))) << method_name(m) << " trial " << t;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!h[i]) ASSERT_EQ(got[i], v[i]);
      }
    }
  }
}

TEST(Impute, ExtrapolationMasksMakeNearestAndLinearCoincide) {
  Rng rng(2);
  const auto grid = masking::make_grid(10, 5);
  for (int t = 0; t < 100; ++t) {
    const auto plan = masking::plan_mask(grid, masking::Strategy::Extrapolation, rng.uniform(0.05, 0.95), t);
    std::vector<std::uint8_t> cells(kFrameCells, 0);
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      for (std::size_t m = 0; m < kWindowMinutes; ++m) {
        cells[s * kWindowMinutes + m] = plan.masked[masking::cell_to_patch(grid, s, m).first];
      }
    }
    std::vector<double> v(kFrameCells);
    for (auto& x : v) x = rng.normal();
    const auto near = impute(v, cells, ImputeMethod::Nearest).values;
    const auto lin = impute(v, cells, ImputeMethod::Linear).values;
    EXPECT_TRUE(bit_equal(near, lin));
  }
}

TEST(Impute, MethodNamesRoundTrip) {
  for (auto m : {ImputeMethod::Mean, ImputeMethod::Nearest, ImputeMethod::Linear, ImputeMethod::Zero}) {
    EXPECT_EQ(method_from_name(method_name(m)), m);
  }
  EXPECT_THROW(method_from_name("kalman"), InvalidArgument);
}
