#include "lsm/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lsm::masking {

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

// Masks `target` patches by filling whole lines (columns or rows) first and
// then a random part of one more line.
void mask_lines(MaskPlan& plan, bool columns, std::size_t target, Rng& rng) {
  const auto& g = plan.grid;
  const std::size_t n_lines = columns ? g.n_time_patches : g.n_signal_patches;
  const std::size_t per_line = columns ? g.n_signal_patches : g.n_time_patches;
  auto patch_of = [&](std::size_t line, std::size_t k) {
    return columns ? g.patch_index(line, k) : g.patch_index(k, line);
  };
  std::vector<std::size_t> lines(n_lines);
  std::iota(lines.begin(), lines.end(), std::size_t{0});
  rng.shuffle(lines);
  const std::size_t full = std::min(target / per_line, n_lines);
  for (std::size_t i = 0; i < full; ++i) {
    for (std::size_t k = 0; k < per_line; ++k) plan.masked[patch_of(lines[i], k)] = 1;
  }
  const std::size_t rest = target - full * per_line;
  if (rest > 0 && full < n_lines) {
    std::vector<std::size_t> ks(per_line);
    std::iota(ks.begin(), ks.end(), std::size_t{0});
    rng.shuffle(ks);
    for (std::size_t i = 0; i < rest; ++i) plan.masked[patch_of(lines[full], ks[i])] = 1;
  }
}

}  // namespace

PatchGrid make_grid(std::size_t patch_time, std::size_t patch_signals, std::size_t signals,
                    std::size_t minutes) {
  if (patch_time == 0 || patch_signals == 0) throw InvalidArgument("patch sizes must be > 0");
  if (minutes % patch_time != 0) {
    throw InvalidArgument("patch_time " + std::to_string(patch_time) + " does not divide " +
                          std::to_string(minutes) + " minutes");
  }
  PatchGrid g;
  g.patch_time = patch_time;
  g.patch_signals = patch_signals;
  g.n_time_patches = minutes / patch_time;
  g.padded_signal_count = (signals + patch_signals - 1) / patch_signals * patch_signals;
  g.n_signal_patches = g.padded_signal_count / patch_signals;
  return g;
}

std::pair<std::size_t, std::size_t> cell_to_patch(const PatchGrid& grid, std::size_t signal,
                                                  std::size_t minute) {
  const std::size_t tp = minute / grid.patch_time, sp = signal / grid.patch_signals;
  const std::size_t off = (signal % grid.patch_signals) * grid.patch_time + minute % grid.patch_time;
  return {grid.patch_index(tp, sp), off};
}

std::vector<double> patchify(std::span<const double> values, const PatchGrid& grid,
                             std::size_t signals) {
  const std::size_t minutes = grid.n_time_patches * grid.patch_time;
  if (values.size() != signals * minutes) throw InvalidArgument("patchify: frame size mismatch");
  std::vector<double> out(grid.num_patches() * grid.patch_dim(), 0.0);
  for (std::size_t s = 0; s < signals; ++s) {
    for (std::size_t m = 0; m < minutes; ++m) {
      const auto [p, off] = cell_to_patch(grid, s, m);
      out[p * grid.patch_dim() + off] = values[s * minutes + m];
    }
  }
  return out;
}

std::vector<double> unpatchify(std::span<const double> patches, const PatchGrid& grid,
                               std::size_t signals) {
  const std::size_t minutes = grid.n_time_patches * grid.patch_time;
  if (patches.size() != grid.num_patches() * grid.patch_dim()) {
    throw InvalidArgument("unpatchify: patch tensor size mismatch");
  }
  std::vector<double> out(signals * minutes);
  for (std::size_t s = 0; s < signals; ++s) {
    for (std::size_t m = 0; m < minutes; ++m) {
      const auto [p, off] = cell_to_patch(grid, s, m);
      out[s * minutes + m] = patches[p * grid.patch_dim() + off];
    }
  }
  return out;
}

std::vector<double> real_cell_mask(const PatchGrid& grid, std::size_t signals) {
  std::vector<double> out(grid.num_patches() * grid.patch_dim(), 0.0);
  const std::size_t minutes = grid.n_time_patches * grid.patch_time;
  for (std::size_t s = 0; s < signals; ++s) {
    for (std::size_t m = 0; m < minutes; ++m) {
      const auto [p, off] = cell_to_patch(grid, s, m);
      out[p * grid.patch_dim() + off] = 1.0;
    }
  }
  return out;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::StructuredTemporal: return "temporal";
    case Strategy::StructuredSensor: return "sensor";
    case Strategy::Extrapolation: return "extrapolation";
    case Strategy::Interpolation: return "interpolation";
  }
  return "random";
}

Strategy strategy_from_name(std::string_view name) {
  for (auto s : {Strategy::Random, Strategy::StructuredTemporal, Strategy::StructuredSensor,
                 Strategy::Extrapolation, Strategy::Interpolation}) {
    if (strategy_name(s) == name) return s;
  }
  throw InvalidArgument("unknown masking strategy: " + std::string(name));
}

std::size_t MaskPlan::masked_count() const {
  return static_cast<std::size_t>(std::count(masked.begin(), masked.end(), std::uint8_t{1}));
}

MaskPlan plan_mask(const PatchGrid& grid, Strategy strategy, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("mask ratio must lie in (0, 1)");
  MaskPlan plan;
  plan.grid = grid;
  plan.strategy = strategy;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.masked.assign(grid.num_patches(), 0);
  Rng rng(seed);
  const std::size_t total = grid.num_patches();
  const std::size_t target = round_half_up(ratio * static_cast<double>(total));
  const std::size_t cols = grid.n_time_patches;

  switch (strategy) {
    case Strategy::Random: {
      std::vector<std::size_t> idx(total);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      rng.shuffle(idx);
      for (std::size_t i = 0; i < target; ++i) plan.masked[idx[i]] = 1;
      break;
    }
    case Strategy::StructuredTemporal:
      mask_lines(plan, true, target, rng);
      break;
    case Strategy::StructuredSensor:
      mask_lines(plan, false, target, rng);
      break;
    case Strategy::Extrapolation: {
      const std::size_t k = std::clamp<std::size_t>(round_half_up(ratio * static_cast<double>(cols)), 1, cols - 1);
      for (std::size_t t = cols - k; t < cols; ++t) {
        for (std::size_t s = 0; s < grid.n_signal_patches; ++s) plan.masked[grid.patch_index(t, s)] = 1;
      }
      break;
    }
    case Strategy::Interpolation: {
      if (cols < 3) throw InvalidArgument("interpolation masking needs at least 3 time patches");
      const std::size_t k = std::clamp<std::size_t>(round_half_up(ratio * static_cast<double>(cols)), 1, cols - 2);
      // Start positions 1 .. cols - k - 1 keep observed context on both sides.
      const std::size_t start = 1 + rng.uniform_int(cols - k - 1);
      for (std::size_t t = start; t < start + k; ++t) {
        for (std::size_t s = 0; s < grid.n_signal_patches; ++s) plan.masked[grid.patch_index(t, s)] = 1;
      }
      break;
    }
  }
  plan.achieved_ratio = static_cast<double>(plan.masked_count()) / static_cast<double>(total);
  return plan;
}

MaskPlan plan_from_cells(const PatchGrid& grid, std::span<const std::uint8_t> cell_mask,
                         std::size_t signals) {
  const std::size_t minutes = grid.n_time_patches * grid.patch_time;
  if (cell_mask.size() != signals * minutes) throw InvalidArgument("cell mask size mismatch");
  MaskPlan plan;
  plan.grid = grid;
  plan.masked.assign(grid.num_patches(), 0);
  for (std::size_t s = 0; s < signals; ++s) {
    for (std::size_t m = 0; m < minutes; ++m) {
      if (cell_mask[s * minutes + m]) plan.masked[cell_to_patch(grid, s, m).first] = 1;
    }
  }
  plan.achieved_ratio =
      static_cast<double>(plan.masked_count()) / static_cast<double>(grid.num_patches());
  plan.ratio = plan.achieved_ratio;
  return plan;
}

CorrelationResult correlation_matrix(const std::vector<frames::SensorFrame>& frames) {
  constexpr std::size_t n = kNumSignals;
  CorrelationResult out;
  out.r.assign(n * n, 0.0);
  out.defined.assign(n, 1);
  std::vector<double> var_self(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, cnt = 0;
      for (const auto& f : frames) {
        for (std::size_t m = 0; m < kWindowMinutes; ++m) {
          if (f.is_missing(i, m) || f.is_missing(j, m)) continue;
          const double x = f.at(i, m), y = f.at(j, m);
          sx += x;
          sy += y;
          sxx += x * x;
          syy += y * y;
          sxy += x * y;
          cnt += 1;
        }
      }
      double r = 0.0;
      if (cnt >= 2) {
        const double cov = sxy / cnt - (sx / cnt) * (sy / cnt);
        const double vx = sxx / cnt - (sx / cnt) * (sx / cnt);
        const double vy = syy / cnt - (sy / cnt) * (sy / cnt);
        if (vx > 1e-12 && vy > 1e-12) r = std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
        if (i == j) var_self[i] = vx;
      }
      out.r[i * n + j] = out.r[j * n + i] = r;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (var_self[i] <= 1e-12) {
      out.defined[i] = 0;
      for (std::size_t j = 0; j < n; ++j) out.r[i * n + j] = out.r[j * n + i] = 0.0;
    }
    out.r[i * n + i] = out.defined[i] ? 1.0 : 0.0;
  }
  return out;
}

std::string_view order_policy_name(OrderPolicy p) {
  switch (p) {
    case OrderPolicy::Clustered: return "clustered";
    case OrderPolicy::Randomized: return "randomized";
    case OrderPolicy::MinAdjacentCorrelation: return "min-adjacent-correlation";
  }
  return "clustered";
}

OrderPolicy order_policy_from_name(std::string_view name) {
  if (name == "clustered") return OrderPolicy::Clustered;
  if (name == "randomized" || name == "random") return OrderPolicy::Randomized;
  if (name == "min-adjacent-correlation" || name == "max-entropy") {
    return OrderPolicy::MinAdjacentCorrelation;
  }
  throw InvalidArgument("unknown order policy: " + std::string(name));
}

double adjacent_cost(std::span<const double> corr, const std::vector<std::size_t>& order) {
  const auto n = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(corr.size()))));
  double c = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) c += std::abs(corr[order[i - 1] * n + order[i]]);
  return c;
}

SignalOrder order_signals(std::span<const double> corr, OrderPolicy policy, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(corr.size()))));
  if (n * n != corr.size()) throw InvalidArgument("correlation matrix must be square");
  SignalOrder out;
  out.policy = policy;
  switch (policy) {
    case OrderPolicy::Clustered:
      out.permutation.resize(n);
      std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
      return out;
    case OrderPolicy::Randomized:
      out.permutation = seeded_permutation(n, seed);
      return out;
    case OrderPolicy::MinAdjacentCorrelation:
      break;
  }
  // Greedy nearest-uncorrelated chain from every start; the cheapest chain wins,
  // earlier starts win ties. A single fixed start can trap the chain.
  double best_cost = 0.0;
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<std::size_t> chain{start};
    std::vector<std::uint8_t> used(n, 0);
    used[start] = 1;
    while (chain.size() < n) {
      const std::size_t last = chain.back();
      std::size_t pick = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        if (pick == n || std::abs(corr[last * n + j]) < std::abs(corr[last * n + pick])) pick = j;
      }
      used[pick] = 1;
      chain.push_back(pick);
    }
    const double cost = adjacent_cost(corr, chain);
    if (out.permutation.empty() || cost < best_cost) {
      best_cost = cost;
      out.permutation = std::move(chain);
    }
  }
  return out;
}

std::vector<double> reorder_rows(std::span<const double> values, const std::vector<std::size_t>& perm,
                                 std::size_t row_len) {
  if (values.size() != perm.size() * row_len) throw InvalidArgument("reorder_rows: size mismatch");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(perm[i] * row_len), row_len,
                out.begin() + static_cast<std::ptrdiff_t>(i * row_len));
  }
  return out;
}

frames::SensorFrame reorder_frame(const frames::SensorFrame& frame,
                                  const std::vector<std::size_t>& perm) {
  if (perm.size() != kNumSignals) throw InvalidArgument("signal order must cover 26 signals");
  frames::SensorFrame out = frame;
  out.values = reorder_rows(frame.values, perm);
  for (std::size_t i = 0; i < kNumSignals; ++i) {
    std::copy_n(frame.missing.begin() + static_cast<std::ptrdiff_t>(perm[i] * kWindowMinutes),
                kWindowMinutes, out.missing.begin() + static_cast<std::ptrdiff_t>(i * kWindowMinutes));
  }
  return out;
}

}  // namespace lsm::masking
