#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/common.hpp"
#include "lsm/frames.hpp"

namespace lsm::masking {

struct PatchGrid {
  std::size_t patch_time = 10;
  std::size_t patch_signals = 5;
  std::size_t n_time_patches = 30;
  std::size_t n_signal_patches = 6;
  std::size_t padded_signal_count = 30;

  std::size_t num_patches() const { return n_time_patches * n_signal_patches; }
  std::size_t patch_dim() const { return patch_time * patch_signals; }
  /// Patches are enumerated time-major: index = time_patch * n_signal_patches + signal_patch.
  std::size_t patch_index(std::size_t time_patch, std::size_t signal_patch) const {
    return time_patch * n_signal_patches + signal_patch;
  }
};

PatchGrid make_grid(std::size_t patch_time, std::size_t patch_signals,
                    std::size_t signals = kNumSignals, std::size_t minutes = kWindowMinutes);

/// Patch tensor [num_patches x patch_dim]; inside a patch, cells are
/// (signal offset) * patch_time + (minute offset). Rows past `signals` are zero.
std::vector<double> patchify(std::span<const double> values, const PatchGrid& grid,
                             std::size_t signals = kNumSignals);
std::vector<double> unpatchify(std::span<const double> patches, const PatchGrid& grid,
                               std::size_t signals = kNumSignals);

/// 1 for patch cells that map to a real signal row, 0 for padding.
std::vector<double> real_cell_mask(const PatchGrid& grid, std::size_t signals = kNumSignals);

/// Flat frame cell (signal, minute) to (patch, offset inside patch).
std::pair<std::size_t, std::size_t> cell_to_patch(const PatchGrid& grid, std::size_t signal,
                                                  std::size_t minute);

enum class Strategy { Random, StructuredTemporal, StructuredSensor, Extrapolation, Interpolation };

std::string_view strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);

struct MaskPlan {
  PatchGrid grid;
  std::vector<std::uint8_t> masked;  // per patch
  Strategy strategy = Strategy::Random;
  double ratio = 0.8;           // requested
  double achieved_ratio = 0.0;  // masked patches / total
  std::uint64_t seed = 0;

  std::size_t masked_count() const;
};

MaskPlan plan_mask(const PatchGrid& grid, Strategy strategy, double ratio, std::uint64_t seed);

/// Per-patch mask from a per-cell mask (signal-major, 26 x 300): a patch is
/// hidden if any of its real cells is.
MaskPlan plan_from_cells(const PatchGrid& grid, std::span<const std::uint8_t> cell_mask,
                         std::size_t signals = kNumSignals);

struct CorrelationResult {
  std::vector<double> r;             // kNumSignals x kNumSignals, row-major
  std::vector<std::uint8_t> defined; // per signal
  double at(std::size_t i, std::size_t j) const { return r[i * kNumSignals + j]; }
};

/// Pearson correlation over cells valid in both signals. `frames` carry raw
/// values with missing flags.
CorrelationResult correlation_matrix(const std::vector<frames::SensorFrame>& frames);

enum class OrderPolicy { Clustered, Randomized, MinAdjacentCorrelation };

std::string_view order_policy_name(OrderPolicy p);
/// Accepts "max-entropy" as an alias of the min-adjacent-correlation policy.
OrderPolicy order_policy_from_name(std::string_view name);

struct SignalOrder {
  std::vector<std::size_t> permutation;  // position -> source signal
  OrderPolicy policy = OrderPolicy::Clustered;
};

/// `corr` is an n x n row-major matrix; n is inferred from its size.
SignalOrder order_signals(std::span<const double> corr, OrderPolicy policy, std::uint64_t seed);

/// Sum of |corr| over adjacent pairs of an ordering.
double adjacent_cost(std::span<const double> corr, const std::vector<std::size_t>& order);

/// Rows of a signal-major matrix reordered so output row i is input row perm[i].
std::vector<double> reorder_rows(std::span<const double> values, const std::vector<std::size_t>& perm,
                                 std::size_t row_len = kWindowMinutes);
frames::SensorFrame reorder_frame(const frames::SensorFrame& frame,
                                  const std::vector<std::size_t>& perm);

}  // namespace lsm::masking
