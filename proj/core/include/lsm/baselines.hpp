#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lsm/common.hpp"

namespace lsm::baselines {

enum class ImputeMethod { Mean, Nearest, Linear, Zero };

std::string_view method_name(ImputeMethod m);
ImputeMethod method_from_name(std::string_view name);

struct ImputeResult {
  std::vector<double> values;
  std::vector<std::uint8_t> zero_filled_rows;  // 1 where a row had nothing observed
};

/// Fills cells flagged in `cell_mask` row by row along time. `values` and
/// `cell_mask` are rows x cols, row-major. Observed cells are copied through.
ImputeResult impute(std::span<const double> values, std::span<const std::uint8_t> cell_mask,
                    ImputeMethod method, std::size_t rows = kNumSignals,
                    std::size_t cols = kWindowMinutes);

/// Single-row variants. They return false when nothing in the row is observed.
bool impute_row_mean(std::span<double> row, std::span<const std::uint8_t> hidden);
bool impute_row_nearest(std::span<double> row, std::span<const std::uint8_t> hidden);
bool impute_row_linear(std::span<double> row, std::span<const std::uint8_t> hidden);

}  // namespace lsm::baselines
