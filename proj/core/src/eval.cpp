#include <algorithm>
#include <cmath>

#include "lsm/eval.hpp"

namespace lsm::eval {

std::string_view task_name(GenTask t) {
  switch (t) {
    case GenTask::RandomImputation: return "random";
    case GenTask::TemporalInterpolation: return "interpolation";
    case GenTask::SensorImputation: return "sensor";
    case GenTask::TemporalExtrapolation: return "extrapolation";
  }
  return "random";
}

GenTask task_from_name(std::string_view name) {
  for (auto t : {GenTask::RandomImputation, GenTask::TemporalInterpolation, GenTask::SensorImputation,
                 GenTask::TemporalExtrapolation}) {
    if (task_name(t) == name) return t;
  }
  if (name == "random_imputation") return GenTask::RandomImputation;
  if (name == "temporal_interpolation") return GenTask::TemporalInterpolation;
  if (name == "sensor_imputation") return GenTask::SensorImputation;
  if (name == "temporal_extrapolation") return GenTask::TemporalExtrapolation;
  throw InvalidArgument("unknown generative task: " + std::string(name));
}

std::size_t sensor_task_signal_count(double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(kNumSignals) + 0.5));
}

std::vector<std::uint8_t> make_task_mask(const GenTaskSpec& spec, const masking::PatchGrid& grid,
                                         std::uint64_t seed) {
  constexpr std::size_t minutes = kWindowMinutes;
  std::vector<std::uint8_t> mask(kFrameCells, 0);
  Rng rng(seed);
  if (spec.task == GenTask::RandomImputation) {
    const auto plan = masking::plan_mask(grid, masking::Strategy::Random, spec.ratio, seed);
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      for (std::size_t m = 0; m < minutes; ++m) {
        if (plan.masked[masking::cell_to_patch(grid, s, m).first]) mask[s * minutes + m] = 1;
      }
    }
    return mask;
  }
  const std::size_t d = spec.duration;
  if (d == 0 || d >= minutes) {
    throw InvalidArgument("task duration must lie in [1, 299] minutes, got " + std::to_string(d));
  }
  // Spans start on patch boundaries whenever the duration is a whole number of patches.
  const std::size_t step = d % grid.patch_time == 0 ? grid.patch_time : 1;
  auto mark = [&](std::size_t s, std::size_t start) {
    for (std::size_t m = start; m < start + d; ++m) mask[s * minutes + m] = 1;
  };
  switch (spec.task) {
    case GenTask::TemporalExtrapolation:
      for (std::size_t s = 0; s < kNumSignals; ++s) mark(s, minutes - d);
      break;
    case GenTask::TemporalInterpolation: {
      // Feasible starts keep at least one observed minute (one patch when aligned) on each side.
      const std::size_t lo = step, hi = minutes - d - step;
      if (hi < lo) throw InvalidArgument("interpolation span leaves no context");
      const std::size_t start = lo + step * rng.uniform_int((hi - lo) / step + 1);
      for (std::size_t s = 0; s < kNumSignals; ++s) mark(s, start);
      break;
    }
    case GenTask::SensorImputation: {
      const std::size_t start = step * rng.uniform_int((minutes - d) / step + 1);
      const std::size_t k = sensor_task_signal_count(spec.sensor_fraction);
      auto order = std::vector<std::size_t>(kNumSignals);
      for (std::size_t i = 0; i < kNumSignals; ++i) order[i] = i;
      rng.shuffle(order);
      for (std::size_t i = 0; i < k; ++i) mark(order[i], start);
      break;
    }
    case GenTask::RandomImputation:
      break;
  }
  return mask;
}

Imputer baseline_imputer(baselines::ImputeMethod method) {
  return [method](const frames::SensorFrame& f, const std::vector<std::uint8_t>& mask) {
    return baselines::impute(f.values, mask, method).values;
  };
}

Imputer model_imputer(std::shared_ptr<const model::MaeModel> model) {
  return [model](const frames::SensorFrame& f, const std::vector<std::uint8_t>& mask) {
    const auto& grid = model->grid();
    const auto plan = masking::plan_from_cells(grid, mask);
    if (plan.masked_count() == 0) return f.values;
    model::Batch b;
    b.size = 1;
    b.input = masking::patchify(f.values, grid);
    b.target = b.input;
    b.masked = plan.masked;
    ag::NoGradGuard no_grad;
    const auto out = model->forward(b);
    const auto recon = masking::unpatchify(out.reconstruction.value(), grid);
    std::vector<double> filled = f.values;
    for (std::size_t i = 0; i < filled.size(); ++i) {
      if (mask[i]) filled[i] = recon[i];
    }
    return filled;
  };
}

std::pair<double, double> error_metrics(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw InvalidArgument("error_metrics: length mismatch");
  if (truth.empty()) throw InvalidArgument("error_metrics: no cells");
  double ae = 0.0, se = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = pred[i] - truth[i];
    ae += std::abs(d);
    se += d * d;
  }
  const double n = static_cast<double>(truth.size());
  return {ae / n, se / n};
}

std::vector<GenResult> eval_generative(const Imputer& imputer, const std::string& method,
                                       const std::vector<frames::SensorFrame>& test,
                                       const std::vector<GenTaskSpec>& specs,
                                       const masking::PatchGrid& grid) {
  if (test.empty()) throw InvalidArgument("eval_generative: empty test set");
  std::vector<GenResult> results;
  for (const auto& spec : specs) {
    GenResult r;
    r.task = std::string(task_name(spec.task));
    r.duration = spec.task == GenTask::RandomImputation ? 0 : spec.duration;
    r.method = method;
    double ae = 0.0, se = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& f = test[i];
      const auto mask = make_task_mask(spec, grid, derive_seed(spec.seed, i));
      const auto pred = imputer(f, mask);
      for (std::size_t c = 0; c < kFrameCells; ++c) {
        if (!mask[c] || f.missing[c]) continue;
        const double d = pred[c] - f.values[c];
        const std::size_t s = c / kWindowMinutes;
        ae += std::abs(d);
        se += d * d;
        r.signal_mae[s] += std::abs(d);
        r.signal_mse[s] += d * d;
        ++r.signal_n[s];
        ++r.n;
      }
    }
    if (r.n > 0) {
      r.mae = ae / static_cast<double>(r.n);
      r.mse = se / static_cast<double>(r.n);
    }
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      if (r.signal_n[s] > 0) {
        r.signal_mae[s] /= static_cast<double>(r.signal_n[s]);
        r.signal_mse[s] /= static_cast<double>(r.signal_n[s]);
      }
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace lsm::eval
