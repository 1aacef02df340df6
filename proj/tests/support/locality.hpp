#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "lsm/model.hpp"

namespace lsm::testkit {

inline bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct LocalityReport {
  std::size_t checks = 0;
  std::size_t violations = 0;
  std::size_t controls_failed = 0;  // masked real target cells that did not move the loss
  std::string first_violation;
};

// Perturbs cells that must not reach the loss and asks for a bit-identical
// value: target cells of visible patches, target and input cells in padded
// rows, and input cells of hidden patches (the encoder never sees them).
// A perturbation of a hidden real target cell must move the loss.
inline LocalityReport check_masked_loss_locality(const model::MaeModel& net, std::size_t frames,
                                                 std::uint64_t seed, std::size_t single_cell_probes = 10) {
  const auto& grid = net.grid();
  const std::size_t n = grid.num_patches(), pd = grid.patch_dim();
  const auto real = masking::real_cell_mask(grid);
  Rng rng(seed);
  LocalityReport rep;
  ag::NoGradGuard ng;

  auto loss_of = [&](const model::Batch& b) { return net.forward(b).loss.item(); };
  auto flag = [&](bool ok, const std::string& what) {
    ++rep.checks;
    if (!ok) {
      if (rep.violations++ == 0) rep.first_violation = what;
    }
  };

  for (std::size_t f = 0; f < frames; ++f) {
    std::vector<double> values(kFrameCells);
    for (auto& v : values) v = rng.normal();
    const double ratio = rng.uniform(0.1, 0.9);
    const auto strategies = {masking::Strategy::Random, masking::Strategy::StructuredTemporal,
                             masking::Strategy::StructuredSensor, masking::Strategy::Extrapolation,
                             masking::Strategy::Interpolation};
    const auto strategy = *(strategies.begin() + rng.uniform_int(strategies.size()));
    const auto plan = masking::plan_mask(grid, strategy, ratio, rng.next_u64());

    model::Batch base;
    base.size = 1;
    base.input = masking::patchify(values, grid);
    base.target = base.input;
    base.masked = plan.masked;
    const double ref = loss_of(base);

    std::vector<std::size_t> outside, hidden_input, hidden_real;
    for (std::size_t i = 0; i < n * pd; ++i) {
      const bool hidden = plan.masked[i / pd] != 0;
      if (!hidden || real[i] == 0.0) outside.push_back(i);
      if (hidden) hidden_input.push_back(i);
      if (hidden && real[i] != 0.0) hidden_real.push_back(i);
    }
    const std::string tag = std::string(masking::strategy_name(strategy)) + " frame " + std::to_string(f);

    {
      auto b = base;
      for (auto i : outside) b.target[i] += rng.normal() * 3.0;
      flag(same_bits(loss_of(b), ref), tag + ": visible/padded target block");
    }
    {
      auto b = base;
      for (std::size_t i = 0; i < n * pd; ++i) {
        if (real[i] == 0.0) b.input[i] = rng.normal() * 3.0;
      }
      flag(same_bits(loss_of(b), ref), tag + ": padded input block");
    }
    {
      auto b = base;
      for (auto i : hidden_input) b.input[i] += rng.normal() * 3.0;
      flag(same_bits(loss_of(b), ref), tag + ": hidden input block");
    }
    for (std::size_t k = 0; k < single_cell_probes; ++k) {
      auto b = base;
      const auto i = outside[rng.uniform_int(outside.size())];
      b.target[i] += 1.0 + rng.uniform();
      if (real[i] == 0.0 && rng.bernoulli(0.5)) b.input[i] += 1.0;
      flag(same_bits(loss_of(b), ref), tag + ": cell " + std::to_string(i));
    }
    {
      auto b = base;
      b.target[hidden_real[rng.uniform_int(hidden_real.size())]] += 1.0;
      if (same_bits(loss_of(b), ref)) ++rep.controls_failed;
    }
  }
  return rep;
}

}  // namespace lsm::testkit
