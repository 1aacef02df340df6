#include "lsm/baselines.hpp"

#include <algorithm>
#include <string>

namespace lsm::baselines {

std::string_view method_name(ImputeMethod m) {
  switch (m) {
    case ImputeMethod::Mean: return "mean";
    case ImputeMethod::Nearest: return "nearest";
    case ImputeMethod::Linear: return "linear";
    case ImputeMethod::Zero: return "zero";
  }
  return "zero";
}

ImputeMethod method_from_name(std::string_view name) {
  for (auto m : {ImputeMethod::Mean, ImputeMethod::Nearest, ImputeMethod::Linear, ImputeMethod::Zero}) {
    if (method_name(m) == name) return m;
  }
  throw InvalidArgument("unknown imputation method: " + std::string(name));
}

bool impute_row_mean(std::span<double> row, std::span<const std::uint8_t> hidden) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!hidden[i]) {
      sum += row[i];
      ++n;
    }
  }
  if (n == 0) return false;
  const double mu = sum / static_cast<double>(n);
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (hidden[i]) row[i] = mu;
  }
  return true;
}

bool impute_row_nearest(std::span<double> row, std::span<const std::uint8_t> hidden) {
  const std::size_t n = row.size();
  // Index of the closest observed cell at or before / at or after each position.
  std::vector<std::ptrdiff_t> prev(n, -1), next(n, -1);
  std::ptrdiff_t last = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!hidden[i]) last = static_cast<std::ptrdiff_t>(i);
    prev[i] = last;
  }
  if (last < 0) return false;
  last = -1;
  for (std::size_t i = n; i-- > 0;) {
    if (!hidden[i]) last = static_cast<std::ptrdiff_t>(i);
    next[i] = last;
  }
  std::vector<double> src(row.begin(), row.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (!hidden[i]) continue;
    const auto p = prev[i], q = next[i];
    std::ptrdiff_t pick;
    if (p < 0) {
      pick = q;
    } else if (q < 0) {
      pick = p;
    } else {
      const auto dp = static_cast<std::ptrdiff_t>(i) - p;
      const auto dq = q - static_cast<std::ptrdiff_t>(i);
      pick = dp <= dq ? p : q;  // ties go to the past
    }
    row[i] = src[static_cast<std::size_t>(pick)];
  }
  return true;
}

bool impute_row_linear(std::span<double> row, std::span<const std::uint8_t> hidden) {
  const std::size_t n = row.size();
  std::ptrdiff_t prev = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (hidden[i]) continue;
    const auto cur = static_cast<std::ptrdiff_t>(i);
    if (prev < 0) {
      for (std::ptrdiff_t k = 0; k < cur; ++k) row[static_cast<std::size_t>(k)] = row[i];
    } else if (cur > prev + 1) {
      const double a = row[static_cast<std::size_t>(prev)], b = row[i];
      const auto span = static_cast<double>(cur - prev);
      for (std::ptrdiff_t k = prev + 1; k < cur; ++k) {
        row[static_cast<std::size_t>(k)] = a + (b - a) * static_cast<double>(k - prev) / span;
      }
    }
    prev = cur;
  }
  if (prev < 0) return false;
  for (std::size_t k = static_cast<std::size_t>(prev) + 1; k < n; ++k) {
    row[k] = row[static_cast<std::size_t>(prev)];
  }
  return true;
}

ImputeResult impute(std::span<const double> values, std::span<const std::uint8_t> cell_mask,
                    ImputeMethod method, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols || cell_mask.size() != rows * cols) {
    throw InvalidArgument("impute: matrix is not " + std::to_string(rows) + " x " + std::to_string(cols));
  }
  ImputeResult r;
  r.values.assign(values.begin(), values.end());
  r.zero_filled_rows.assign(rows, 0);
  for (std::size_t s = 0; s < rows; ++s) {
    auto row = std::span<double>(r.values).subspan(s * cols, cols);
    const auto hidden = cell_mask.subspan(s * cols, cols);
    bool ok = false;
    switch (method) {
      case ImputeMethod::Mean: ok = impute_row_mean(row, hidden); break;
      case ImputeMethod::Nearest: ok = impute_row_nearest(row, hidden); break;
      case ImputeMethod::Linear: ok = impute_row_linear(row, hidden); break;
      case ImputeMethod::Zero: ok = false; break;
    }
    if (!ok) {
      for (std::size_t i = 0; i < cols; ++i) {
        if (hidden[i]) row[i] = 0.0;
      }
      const bool all_hidden = std::all_of(hidden.begin(), hidden.end(), [](auto h) { return h != 0; });
      r.zero_filled_rows[s] = all_hidden ? 1 : 0;
    }
  }
  return r;
}

}  // namespace lsm::baselines
