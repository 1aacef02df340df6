#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lsm/eval.hpp"

using namespace lsm;
using namespace lsm::eval;

namespace {

// AP from the definition: mean over positives of the precision at that
// positive's rank, ranks from descending score with ties in input order.
double oracle_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& pos) {
  std::vector<std::pair<std::size_t, double>> at_rank;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    std::size_t above = 0, pos_above = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] > s[i] || (s[j] == s[i] && j <= i)) {
        ++above;
        pos_above += pos[j];
      }
    }
    at_rank.emplace_back(above, static_cast<double>(pos_above) / static_cast<double>(above));
  }
  if (at_rank.empty()) return std::nan("");
  std::sort(at_rank.begin(), at_rank.end());
  double sum = 0;
  for (const auto& [r, p] : at_rank) sum += p;
  return sum / static_cast<double>(at_rank.size());
}

}  // namespace

TEST(Metrics, AveragePrecisionWorkedExample) {
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<std::uint8_t> pos{1, 0, 1};
  EXPECT_NEAR(average_precision(s, pos), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_TRUE(std::isnan(average_precision(s, std::vector<std::uint8_t>{0, 0, 0})));
}

TEST(Metrics, PerfectScores) {
  const std::vector<int> labels{0, 1, 2, 1};
  std::vector<double> s(12, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) s[i * 3 + labels[i]] = 1.0;
  const auto r = cls_metrics(s, labels, 3);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_EQ(r.map, 100.0);
  EXPECT_THROW(cls_metrics(std::vector<double>(11), labels, 3), InvalidArgument);
}

TEST(Metrics, MatchesBruteForceOnRandomSets) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.uniform_int(40), c = 2 + rng.uniform_int(7);
    const bool coarse = rng.bernoulli(0.3);
    std::vector<int> labels(n);
    std::vector<double> s(n * c);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(c));
    for (auto& x : s) x = coarse ? std::round(rng.uniform() * 4) / 4 : rng.uniform();
    const auto r = cls_metrics(s, labels, c);

    std::size_t correct = 0;
    std::vector<std::vector<std::size_t>> conf(c, std::vector<std::size_t>(c, 0));
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k) {
        if (s[i * c + k] > s[i * c + best]) best = k;
      }
      ++conf[labels[i]][best];
      correct += best == static_cast<std::size_t>(labels[i]);
    }
    ASSERT_EQ(r.accuracy, 100.0 * correct / n);
    ASSERT_EQ(r.confusion, conf);
    double sum = 0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < c; ++k) {
      std::vector<double> col(n);
      std::vector<std::uint8_t> pos(n);
      std::size_t row_sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = s[i * c + k];
        pos[i] = labels[i] == static_cast<int>(k);
      }
      for (auto v : conf[k]) row_sum += v;
      ASSERT_EQ(row_sum, static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<int>(k))));
      const double ap = oracle_ap(col, pos);
      if (std::isnan(ap)) {
        ASSERT_TRUE(std::isnan(r.per_class_ap[k]));
      } else {
        ASSERT_EQ(r.per_class_ap[k], ap) << "trial " << t << " class " << k;
        sum += ap;
        ++m;
      }
    }
    ASSERT_EQ(r.map, 100.0 * sum / m);
  }
}

TEST(FewShot, ExactCountsAndDeterminism) {
  std::vector<int> labels;
  for (int c = 0; c < 8; ++c) {
    for (int i = 0; i < 10 + c; ++i) labels.push_back(c);
  }
  const auto a = few_shot_subset(labels, 5, 8, 3);
  EXPECT_EQ(a.size(), 40u);
  EXPECT_EQ(a, few_shot_subset(labels, 5, 8, 3));
  EXPECT_NE(a, few_shot_subset(labels, 5, 8, 4));
  std::vector<int> per(8, 0);
  for (auto i : a) ++per[labels[i]];
  for (int n : per) EXPECT_EQ(n, 5);
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 40u);

  std::vector<int> short_class{0, 0, 0, 0, 0, 1, 1, 1};
  EXPECT_THROW(few_shot_subset(short_class, 5, 2, 1), InsufficientClass);
}

TEST(FewShot, LargerSubsetsExtendSmallerOnes) {
  std::vector<int> labels;
  for (int c = 0; c < 8; ++c) {
    for (int i = 0; i < 30; ++i) labels.push_back(c);
  }
  const auto k5 = few_shot_subset(labels, 5, 8, 9);
  const auto k20 = few_shot_subset(labels, 20, 8, 9);
  for (auto i : k5) EXPECT_NE(std::find(k20.begin(), k20.end(), i), k20.end());
}

TEST(BalancedSoftmax, EqualCountsMatchPlainCrossEntropy) {
  Rng rng(2);
  std::vector<double> logits(6 * 4);
  for (auto& x : logits) x = rng.normal() * 3;
  const std::vector<int> labels{0, 1, 2, 3, 0, 1};
  const auto counts = class_counts({0, 1, 2, 3, 0, 1, 2, 3}, 4);
  std::vector<double> prior;
  for (double c : counts) prior.push_back(std::log(c / 8.0));
  const auto t = ag::Tensor::constant({6, 4}, logits);
  EXPECT_NEAR(ag::cross_entropy(t, labels, prior).item(), ag::cross_entropy(t, labels).item(), 1e-12);
}

TEST(Probe, SeparableEmbeddingsReachFullTrainingAccuracy) {
  Rng rng(3);
  std::vector<std::vector<double>> emb;
  std::vector<int> labels;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 10 + 5 * c; ++i) {
      std::vector<double> e(8);
      for (auto& x : e) x = 0.3 * rng.normal();
      e[c] += 3.0;
      emb.push_back(e);
      labels.push_back(c);
    }
  }
  TrainParams hp;
  hp.steps = 200;
  hp.base_lr = 3e-2;
  const auto grid = masking::make_grid(10, 5);
  const auto probe = train_probe(emb, labels, ProbeKind::Linear, 4, grid, 8, hp, 1);
  const auto r = cls_metrics(probe_scores(probe, emb, grid, 8), labels, 4);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_THROW(train_probe(emb, std::vector<int>(emb.size(), 1), ProbeKind::Linear, 4, grid, 8, hp, 1),
               InvalidArgument);
}

TEST(Probe, ConvHeadIsTinyNextToBaseEncoder) {
  const auto base = model::variant("base");
  const Probe conv(ProbeKind::Conv, base.enc_dim, 30, 6, 8, 1);
  const double share = static_cast<double>(conv.num_params()) / static_cast<double>(model::encoder_param_count(base));
  EXPECT_LT(share, 0.002) << conv.num_params();
  EXPECT_GT(conv.num_params(), Probe(ProbeKind::Linear, base.enc_dim, 30, 6, 8, 1).num_params());
}

TEST(Probe, ConvProbeTrainsOnPatchEmbeddings) {
  Rng rng(4);
  const auto grid = masking::make_grid(60, 13);  // 5 x 2 patch grid
  std::vector<std::vector<double>> emb;
  std::vector<int> labels;
  for (int i = 0; i < 24; ++i) {
    const int c = i % 2;
    std::vector<double> e(10 * 4);
    for (auto& x : e) x = 0.2 * rng.normal() + (c ? 1.0 : -1.0);
    emb.push_back(e);
    labels.push_back(c);
  }
  TrainParams hp;
  hp.steps = 100;
  hp.base_lr = 1e-2;
  const auto probe = train_probe(emb, labels, ProbeKind::Conv, 2, grid, 4, hp, 2);
  EXPECT_EQ(cls_metrics(probe_scores(probe, emb, grid, 4), labels, 2).accuracy, 100.0);
}

TEST(FineTune, ZeroStepsKeepsInitialPredictions) {
  Rng rng(5);
  std::vector<frames::SensorFrame> frames(6);
  for (auto& f : frames) {
    for (auto& v : f.values) v = rng.normal();
  }
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  const model::MaeModel pre(model::variant("tiny"), 7);
  TrainParams hp;
  hp.steps = 0;
  const auto tuned = fine_tune(pre, frames, labels, 3, hp, 11);
  auto copy = std::make_shared<model::MaeModel>(pre.config(), 0);
  copy->load_values(pre.values());
  const auto fresh = make_classifier(copy, 3, derive_seed(11, 1));
  EXPECT_EQ(classifier_scores(tuned, frames), classifier_scores(fresh, frames));
  EXPECT_EQ(tuned.backbone->values(), pre.values());
}

TEST(FineTune, DeterministicAndUpdatesEncoder) {
  Rng rng(6);
  std::vector<frames::SensorFrame> frames(8);
  std::vector<int> labels;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (auto& v : frames[i].values) v = rng.normal() + (i % 2 ? 0.5 : -0.5);
    labels.push_back(static_cast<int>(i % 2));
  }
  const model::MaeModel pre(model::variant("tiny"), 8);
  TrainParams hp;
  hp.steps = 3;
  hp.batch = 4;
  hp.warmup = 1;
  hp.noise_sigma = 0.1;
  const auto a = fine_tune(pre, frames, labels, 2, hp, 12);
  const auto b = fine_tune(pre, frames, labels, 2, hp, 12);
  EXPECT_EQ(classifier_scores(a, frames), classifier_scores(b, frames));
  EXPECT_NE(a.backbone->values(), pre.values());
  const auto s = supervised(pre.config(), frames, labels, 2, hp, 12);
  EXPECT_EQ(classifier_scores(s, frames), classifier_scores(supervised(pre.config(), frames, labels, 2, hp, 12), frames));
}
