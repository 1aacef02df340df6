#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lsm/optim.hpp"

using namespace lsm;
using ag::Tensor;
using optim::AdamW;
using optim::NamedParam;

namespace {

void set_grad(Tensor& t, std::vector<double> g) {
  auto dst = t.mutable_grad();
  std::copy(g.begin(), g.end(), dst.begin());
}

}  // namespace

TEST(AdamW, ZeroGradientWithoutDecayLeavesParameters) {
  auto p = Tensor::parameter({3}, {1.0, -2.0, 0.5});
  set_grad(p, {0, 0, 0});
  optim::AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({{"w", p, true}}, cfg);
  for (int i = 0; i < 5; ++i) opt.step(0.1);
  EXPECT_EQ(p.value()[0], 1.0);
  EXPECT_EQ(p.value()[1], -2.0);
  EXPECT_EQ(p.value()[2], 0.5);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  auto p = Tensor::parameter({1}, {0.0});
  set_grad(p, {1.0});
  optim::AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({{"w", p, true}}, cfg);
  opt.step(0.1);
  // mhat = 1, vhat = 1 after bias correction.
  EXPECT_NEAR(p.value()[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(opt.state().step, 1u);
}

TEST(AdamW, DecoupledDecayShrinksByLrTimesLambda) {
  auto p = Tensor::parameter({2}, {2.0, -4.0});
  auto b = Tensor::parameter({1}, {3.0});
  set_grad(p, {0, 0});
  set_grad(b, {0});
  optim::AdamWConfig cfg;
  cfg.weight_decay = 0.01;
  AdamW opt({{"w", p, true}, {"b", b, false}}, cfg);
  double expect = 2.0;
  for (int i = 0; i < 3; ++i) {
    opt.step(0.5);
    expect -= 0.5 * 0.01 * expect;
    EXPECT_DOUBLE_EQ(p.value()[0], expect);
  }
  EXPECT_EQ(b.value()[0], 3.0);
}

TEST(AdamW, NonFiniteGradientDiverges) {
  auto p = Tensor::parameter({2}, {1.0, 1.0});
  set_grad(p, {0.0, std::nan("")});
  AdamW opt({{"w", p, true}});
  EXPECT_THROW(opt.step(0.1), TrainingDiverged);
  EXPECT_EQ(p.value()[0], 1.0);
}

TEST(AdamW, MomentsTrackParameterShapes) {
  auto a = Tensor::parameter({2, 3}, std::vector<double>(6, 0.0));
  auto b = Tensor::parameter({4}, std::vector<double>(4, 0.0));
  AdamW opt({{"a", a, true}, {"b", b, false}});
  ASSERT_EQ(opt.state().m.size(), 2u);
  EXPECT_EQ(opt.state().m[0].size(), 6u);
  EXPECT_EQ(opt.state().v[1].size(), 4u);
}

TEST(LrSchedule, WarmupThenCosine) {
  optim::LrSchedule s{100, 2000, 5e-3};
  EXPECT_EQ(optim::lr_at(0, s), 0.0);
  EXPECT_DOUBLE_EQ(optim::lr_at(50, s), 2.5e-3);
  EXPECT_DOUBLE_EQ(optim::lr_at(100, s), 5e-3);
  EXPECT_NEAR(optim::lr_at(1050, s), 2.5e-3, 1e-18);
  EXPECT_NEAR(optim::lr_at(2000, s), 0.0, 1e-18);
  double prev = optim::lr_at(100, s);
  for (std::size_t t = 101; t <= 2000; ++t) {
    const double lr = optim::lr_at(t, s);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Clip, ScalesOnlyAboveCap) {
  auto a = Tensor::parameter({2}, {0, 0});
  set_grad(a, {0.3, 0.4});
  std::vector<NamedParam> ps{{"a", a, true}};
  EXPECT_DOUBLE_EQ(optim::clip_gradients(ps, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(a.grad()[0], 0.3);

  auto b = Tensor::parameter({1}, {0});
  set_grad(a, {2.4, 0.0});
  set_grad(b, {3.2});
  ps.push_back({"b", b, true});
  EXPECT_DOUBLE_EQ(optim::clip_gradients(ps, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(a.grad()[0], 0.6);
  EXPECT_DOUBLE_EQ(b.grad()[0], 0.8);
}

TEST(Clip, PostClipNormNeverExceedsCap) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    auto a = Tensor::parameter({5}, std::vector<double>(5, 0.0));
    std::vector<double> g(5);
    for (auto& x : g) x = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
    set_grad(a, g);
    std::vector<NamedParam> ps{{"a", a, true}};
    const double cap = rng.uniform(0.01, 5.0);
    optim::clip_gradients(ps, cap);
    EXPECT_LE(optim::global_grad_norm(ps), cap + 1e-9);
  }
}
