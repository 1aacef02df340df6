#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lsm/frames.hpp"
#include "lsm/model.hpp"

namespace lsm::scaling {

struct ScalingRun {
  std::string variant;
  frames::SliceKind kind = frames::SliceKind::Sample;
  std::size_t slice_size = 0;
  double data_hours = 0.0;
  std::size_t param_count = 0;
  std::size_t steps = 0;
  std::size_t batch = 0;
  double compute = 0.0;     // training FLOPs
  double eval_loss = 0.0;   // NaN when the run diverged
  bool diverged = false;
  bool resumed = false;     // loaded from an existing manifest instead of trained
  std::string key;          // manifest hash of the cell definition
  std::string note;
};

/// Forward FLOPs x 3 (forward plus a backward at twice the cost) x batch x steps.
double compute_proxy(const model::ModelConfig& cfg, double mask_ratio, std::size_t batch, std::size_t steps);

struct SweepGrid {
  std::vector<std::string> variants;
  frames::SliceKind kind = frames::SliceKind::Sample;
  std::vector<std::size_t> slice_sizes;
  std::vector<std::size_t> step_budgets;
  std::size_t patch_time = 10;
  std::size_t patch_signals = 5;
  model::PretrainParams train{};
};

/// Pretrains every (variant, slice, steps) cell on prepared training frames and
/// scores it by masked reconstruction loss on the prepared test frames. Each
/// finished cell leaves `run-<key>.manifest` in `manifest_dir`; cells whose
/// manifest already records a result are loaded rather than retrained.
/// Diverged cells are recorded and the sweep moves on.
std::vector<ScalingRun> run_sweep(const SweepGrid& grid, const std::vector<frames::SensorFrame>& train,
                                  const std::vector<frames::SensorFrame>& test,
                                  const std::filesystem::path& manifest_dir, std::uint64_t seed,
                                  const std::function<void(const ScalingRun&)>& on_run = {});

/// Manifest hash of one sweep cell.
std::string cell_key(const std::string& variant, const SweepGrid& grid, std::size_t slice_size,
                     std::size_t steps, std::uint64_t seed);

// --- Power law --------------------------------------------------------------

struct PowerLawFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double residual = 0.0;                 // sum of squared log-space errors
  std::array<double, 9> covariance{};    // (a, b, c), row-major; c row/column zero when fixed
  std::size_t iterations = 0;

  double predict(double compute) const;
};

struct FitOptions {
  bool fix_c_zero = false;
  std::size_t max_iterations = 200;
};

class FitFailed : public RuntimeFailure {
 public:
  FitFailed(const std::string& what, PowerLawFit best) : RuntimeFailure(what), best_(best) {}
  const PowerLawFit& best() const noexcept { return best_; }

 private:
  PowerLawFit best_;
};

/// Least squares on sum (log L - log(a C^b + c))^2 with a > 0, c >= 0. Seeds
/// from a (b, c) grid and refines each seed with Levenberg-Marquardt.
/// Requires at least 4 points with positive C and L.
PowerLawFit fit_powerlaw(std::span<const double> compute, std::span<const double> loss,
                         const FitOptions& options = {});

// --- Pareto front -----------------------------------------------------------

/// Indices of points not dominated in (compute, loss), both minimized, sorted by
/// compute then loss. Points with a NaN coordinate are skipped.
std::vector<std::size_t> pareto_indices(std::span<const double> compute, std::span<const double> loss);

std::vector<ScalingRun> pareto_front(const std::vector<ScalingRun>& runs);

}  // namespace lsm::scaling
