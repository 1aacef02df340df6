#pragma once

#include <string>
#include <vector>

#include "lsm/tensor.hpp"

namespace lsm::optim {

struct NamedParam {
  std::string name;
  ag::Tensor tensor;
  bool decay = true;  // matrices decay; biases, norms and embeddings do not
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, AdamWConfig cfg = {});

  /// One update using each parameter's accumulated gradient. Throws
  /// TrainingDiverged if any gradient entry is not finite.
  void step(double lr);
  void zero_grad();

  const std::vector<NamedParam>& params() const { return params_; }
  const OptimizerState& state() const { return state_; }
  OptimizerState& mutable_state() { return state_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<NamedParam> params_;
  AdamWConfig cfg_;
  OptimizerState state_;
};

struct LrSchedule {
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 2000;
  double base_lr = 5e-3;
};

/// Linear warmup from 0, then cosine decay to 0 at total_steps.
double lr_at(std::size_t step, const LrSchedule& schedule);

/// Scales all gradients so their global L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_gradients(const std::vector<NamedParam>& params, double max_norm);

double global_grad_norm(const std::vector<NamedParam>& params);

}  // namespace lsm::optim
