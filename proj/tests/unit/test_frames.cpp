#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lsm/frames.hpp"

using namespace lsm;
using namespace lsm::frames;

namespace {

SensorFrame random_frame(const std::string& subject, Rng& rng, double missing_p = 0.1) {
  SensorFrame f;
  f.subject_id = subject;
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    const double mu = rng.uniform(-50, 50), sd = rng.uniform(0.5, 5);
    for (std::size_t m = 0; m < kWindowMinutes; ++m) {
      f.at(s, m) = rng.normal(mu, sd);
      f.missing[s * kWindowMinutes + m] = rng.bernoulli(missing_p);
    }
    f.missing[s * kWindowMinutes + rng.uniform_int(kWindowMinutes)] = 0;
  }
  return f;
}

std::vector<SensorFrame> corpus(std::size_t subjects, std::size_t per_subject, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SensorFrame> out;
  for (std::size_t s = 0; s < subjects; ++s) {
    for (std::size_t w = 0; w < per_subject; ++w) out.push_back(random_frame("s" + std::to_string(s), rng));
  }
  return out;
}

std::vector<double> filled(std::vector<double> row, const std::vector<std::uint8_t>& miss) {
  EXPECT_TRUE(fill_row(row, miss));
  return row;
}

}  // namespace

TEST(FillGaps, BackfillThenLinear) {
  EXPECT_EQ(filled({0, 0, 3, 0, 5}, {1, 1, 0, 1, 0}), (std::vector<double>{3, 3, 3, 4, 5}));
  EXPECT_EQ(filled({1, 2, 3}, {0, 0, 0}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(filled({1, 9, 9, 4, 7}, {0, 1, 1, 0, 0}), (std::vector<double>{1, 2, 3, 4, 7}));
  EXPECT_EQ(filled({2, 0, 0}, {0, 1, 1}), (std::vector<double>{2, 2, 2}));
}

TEST(FillGaps, FullyMissingRowRaises) {
  SensorFrame f;
  for (std::size_t m = 0; m < kWindowMinutes; ++m) f.missing[3 * kWindowMinutes + m] = 1;
  try {
    fill_gaps(f);
    FAIL() << "expected StructurallyMissingRow";
  } catch (const StructurallyMissingRow& e) {
    EXPECT_EQ(e.signal(), 3u);
  }
}

TEST(FillGaps, IdempotentAndKeepsObservedCells) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto f = random_frame("x", rng, rng.uniform(0.0, 0.9));
    const auto once = fill_gaps(f);
    const auto twice = fill_gaps(once);
    EXPECT_EQ(once.values, twice.values);
    EXPECT_EQ(once.missing, f.missing);
    for (std::size_t i = 0; i < kFrameCells; ++i) {
      if (!f.missing[i]) EXPECT_EQ(once.values[i], f.values[i]);
      EXPECT_TRUE(std::isfinite(once.values[i]));
    }
  }
}

TEST(Norm, RoundTripIsIdentity) {
  const auto frames = corpus(3, 2, 1);
  const auto st = fit_norm(frames);
  for (const auto& f : frames) {
    const auto back = invert_norm(apply_norm(f, st), st);
    for (std::size_t i = 0; i < kFrameCells; ++i) EXPECT_NEAR(back.values[i], f.values[i], 1e-9);
  }
}

TEST(Norm, TrainingSplitIsStandardized) {
  const auto frames = corpus(4, 3, 2);
  const auto st = fit_norm(frames);
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    double sum = 0, ss = 0, n = 0;
    for (const auto& f : frames) {
      const auto z = apply_norm(f, st);
      for (std::size_t m = 0; m < kWindowMinutes; ++m) {
        if (f.is_missing(s, m)) continue;
        sum += z.at(s, m);
        n += 1;
      }
    }
    const double mean = sum / n;
    for (const auto& f : frames) {
      const auto z = apply_norm(f, st);
      for (std::size_t m = 0; m < kWindowMinutes; ++m) {
        if (!f.is_missing(s, m)) ss += (z.at(s, m) - mean) * (z.at(s, m) - mean);
      }
    }
    EXPECT_LT(std::fabs(mean), 1e-6);
    EXPECT_NEAR(std::sqrt(ss / n), 1.0, 1e-6);
  }
}

TEST(Norm, TestFramesUseTrainStatistics) {
  auto frames = corpus(6, 2, 3);
  const auto split = split_by_subject(frames, 0.5, 9);
  const auto st = fit_norm(frames, split.train);
  int nonzero = 0;
  for (auto i : split.test) {
    const auto z = apply_norm(frames[i], st);
    double s = 0;
    for (std::size_t m = 0; m < kWindowMinutes; ++m) s += z.at(0, m);
    nonzero += std::fabs(s / kWindowMinutes) > 1e-3;
  }
  EXPECT_GT(nonzero, 0);
}

TEST(Norm, DegenerateSignalRejected) {
  auto frames = corpus(1, 2, 5);
  for (auto& f : frames) {
    for (std::size_t m = 0; m < kWindowMinutes; ++m) f.at(7, m) = 3.0;
  }
  EXPECT_THROW(fit_norm(frames), DegenerateSignal);
}

TEST(Prepare, FillsNormalizesAndZeroesEmptyRows) {
  Rng rng(6);
  auto f = random_frame("a", rng);
  for (std::size_t m = 0; m < kWindowMinutes; ++m) f.missing[5 * kWindowMinutes + m] = 1;
  NormStats st;
  st.mean.fill(1.0);
  st.std.fill(2.0);
  const auto p = prepare_frame(f, st);
  const auto g = fill_gaps([&] {
    auto c = f;
    for (std::size_t m = 0; m < kWindowMinutes; ++m) c.missing[5 * kWindowMinutes + m] = 0;
    return c;
  }());
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    for (std::size_t m = 0; m < kWindowMinutes; ++m) {
      if (s == 5) {
        EXPECT_EQ(p.at(s, m), 0.0);
      } else {
        EXPECT_NEAR(p.at(s, m), (g.at(s, m) - 1.0) / 2.0, 1e-12);
      }
    }
  }
  EXPECT_EQ(p.missing, f.missing);
}

TEST(Split, SubjectDisjointAndDeterministic) {
  const auto frames = corpus(10, 2, 7);
  const auto a = split_by_subject(frames, 0.8, 3);
  const auto b = split_by_subject(frames, 0.8, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::string> tr, te;
  for (auto i : a.train) tr.insert(frames[i].subject_id);
  for (auto i : a.test) te.insert(frames[i].subject_id);
  EXPECT_EQ(tr.size(), 8u);
  EXPECT_EQ(te.size(), 2u);
  for (const auto& s : tr) EXPECT_EQ(te.count(s), 0u);
  EXPECT_EQ(a.train.size() + a.test.size(), frames.size());
}

TEST(Split, NeedsTwoSubjects) {
  EXPECT_THROW(split_by_subject(corpus(1, 3, 1), 0.8, 1), InvalidArgument);
  EXPECT_THROW(split_by_subject(corpus(3, 1, 1), 1.0, 1), InvalidArgument);
}

TEST(Slice, SampleSliceSizeHoursAndNesting) {
  const auto frames = corpus(5, 4, 8);
  std::vector<std::size_t> train(frames.size());
  for (std::size_t i = 0; i < train.size(); ++i) train[i] = i;
  const auto small = make_slice(frames, train, SliceKind::Sample, 5, 42);
  const auto big = make_slice(frames, train, SliceKind::Sample, 12, 42);
  EXPECT_EQ(small.indices.size(), 5u);
  EXPECT_DOUBLE_EQ(small.hours(), 25.0);
  EXPECT_TRUE(std::equal(small.indices.begin(), small.indices.end(), big.indices.begin()));
  EXPECT_THROW(make_slice(frames, train, SliceKind::Sample, 21, 1), InvalidArgument);
}

TEST(Slice, SubjectSliceTakesWholeSubjects) {
  const auto frames = corpus(6, 3, 9);
  std::vector<std::size_t> train(frames.size());
  for (std::size_t i = 0; i < train.size(); ++i) train[i] = i;
  const auto sl = make_slice(frames, train, SliceKind::Subject, 2, 5);
  std::set<std::string> chosen;
  for (auto i : sl.indices) chosen.insert(frames[i].subject_id);
  EXPECT_EQ(chosen.size(), 2u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool in = std::find(sl.indices.begin(), sl.indices.end(), i) != sl.indices.end();
    EXPECT_EQ(in, chosen.count(frames[i].subject_id) == 1);
  }
  const auto bigger = make_slice(frames, train, SliceKind::Subject, 4, 5);
  EXPECT_TRUE(std::equal(sl.indices.begin(), sl.indices.end(), bigger.indices.begin()));
  EXPECT_THROW(make_slice(frames, train, SliceKind::Subject, 7, 5), InvalidArgument);
  EXPECT_EQ(slice_kind_from_name(slice_kind_name(SliceKind::Subject)), SliceKind::Subject);
}

TEST(WindowLabel, MajorityAboveThreshold) {
  std::vector<Activity> labels(300, Activity::None);
  EXPECT_EQ(window_label(labels), Activity::None);
  for (int i = 0; i < 29; ++i) labels[i] = Activity::Running;
  EXPECT_EQ(window_label(labels), Activity::None);
  labels[29] = Activity::Walking;
  labels[30] = Activity::Walking;
  EXPECT_EQ(window_label(labels), Activity::Running);
}

TEST(Assemble, GeneratedFramesCarryMaskAndLabels) {
  CorpusOptions o;
  o.subjects = 2;
  o.windows_per_subject = 1;
  o.labeled = true;
  o.seed = 3;
  const auto frames = generate_frames(o);
  ASSERT_FALSE(frames.empty());
  for (const auto& f : frames) {
    EXPECT_EQ(f.values.size(), kFrameCells);
    EXPECT_EQ(f.window_label, window_label(f.minute_labels));
    EXPECT_NE(f.window_label, Activity::None);
    for (std::size_t m = 0; m < kWindowMinutes; ++m) {
      if (f.minute_labels[m] != Activity::None) {
        EXPECT_TRUE(f.is_missing(features::kSclValue, m));
        EXPECT_TRUE(f.is_missing(features::kSkinTemp, m));
      }
    }
  }
}
