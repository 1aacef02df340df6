#include "lsm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lsm::optim {

AdamW::AdamW(std::vector<NamedParam> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    state_.m.emplace_back(p.tensor.size(), 0.0);
    state_.v.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void AdamW::step(double lr) {
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw TrainingDiverged("non-finite gradient in " + p.name, state_.step);
    }
  }
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto value = p.tensor.mutable_value();
    const auto grad = p.tensor.grad();
    auto& m = state_.m[i];
    auto& v = state_.v[i];
    const double wd = p.decay ? cfg_.weight_decay : 0.0;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad.empty() ? 0.0 : grad[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      value[k] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + wd * value[k]);
    }
  }
}

double lr_at(std::size_t step, const LrSchedule& s) {
  if (s.total_steps == 0) return 0.0;
  if (step < s.warmup_steps) {
    return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  if (s.total_steps <= s.warmup_steps) return s.base_lr;
  const double progress = std::min(
      1.0, static_cast<double>(step - s.warmup_steps) / static_cast<double>(s.total_steps - s.warmup_steps));
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double global_grad_norm(const std::vector<NamedParam>& params) {
  double ss = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) ss += g * g;
  }
  return std::sqrt(ss);
}

double clip_gradients(const std::vector<NamedParam>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto p : params) {
      if (p.tensor.grad().empty()) continue;
      for (double& g : p.tensor.mutable_grad()) g *= f;
    }
  }
  return norm;
}

}  // namespace lsm::optim
