#include "lsm/scaling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lsm/io.hpp"

namespace lsm::scaling {

double compute_proxy(const model::ModelConfig& cfg, double mask_ratio, std::size_t batch, std::size_t steps) {
  return model::estimate_flops(cfg, cfg.grid(), mask_ratio) * 1e9 * 3.0 * static_cast<double>(batch) *
         static_cast<double>(steps);
}

// --- Sweeps -----------------------------------------------------------------

std::string cell_key(const std::string& variant, const SweepGrid& grid, std::size_t slice_size,
                     std::size_t steps, std::uint64_t seed) {
  const auto& t = grid.train;
  const io::Entries def = {
      {"variant", variant},
      {"patch", std::to_string(grid.patch_time) + "x" + std::to_string(grid.patch_signals)},
      {"slice_kind", std::string(frames::slice_kind_name(grid.kind))},
      {"slice_size", std::to_string(slice_size)},
      {"steps", std::to_string(steps)},
      {"batch", std::to_string(t.batch)},
      {"warmup", std::to_string(t.warmup)},
      {"base_lr", format_double(t.base_lr)},
      {"mask_ratio", format_double(t.mask_ratio)},
      {"strategy", std::string(masking::strategy_name(t.strategy))},
      {"weight_decay", format_double(t.adamw.weight_decay)},
      {"clip", format_double(t.clip)},
      {"seed", std::to_string(seed)},
  };
  return io::sha256_hex(io::format_entries(def)).substr(0, 16);
}

namespace {

io::Entries run_entries(const ScalingRun& r) {
  return {{"key", r.key},
          {"variant", r.variant},
          {"slice_kind", std::string(frames::slice_kind_name(r.kind))},
          {"slice_size", std::to_string(r.slice_size)},
          {"data_hours", format_double(r.data_hours)},
          {"params", std::to_string(r.param_count)},
          {"steps", std::to_string(r.steps)},
          {"batch", std::to_string(r.batch)},
          {"flops", format_double(r.compute)},
          {"eval_loss", format_double(r.eval_loss)},
          {"note", r.note},
          {"status", r.diverged ? "diverged" : "done"}};
}

ScalingRun run_from_entries(const io::Entries& e) {
  auto get = [&](const std::string& k) {
    auto v = io::manifest_value(e, k);
    if (v.empty() && k != "note") throw SchemaError("sweep manifest lacks " + k);
    return v;
  };
  ScalingRun r;
  try {
    r.key = get("key");
    r.variant = get("variant");
    r.kind = frames::slice_kind_from_name(get("slice_kind"));
    r.slice_size = std::stoull(get("slice_size"));
    r.data_hours = std::stod(get("data_hours"));
    r.param_count = std::stoull(get("params"));
    r.steps = std::stoull(get("steps"));
    r.batch = std::stoull(get("batch"));
    r.compute = std::stod(get("flops"));
    const auto loss = get("eval_loss");
    r.eval_loss = loss == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(loss);
  } catch (const std::invalid_argument&) {
    throw SchemaError("sweep manifest has a malformed value");
  }
  r.note = get("note");
  r.diverged = get("status") == "diverged";
  r.resumed = true;
  return r;
}

}  // namespace

std::vector<ScalingRun> run_sweep(const SweepGrid& grid, const std::vector<frames::SensorFrame>& train,
                                  const std::vector<frames::SensorFrame>& test,
                                  const std::filesystem::path& manifest_dir, std::uint64_t seed,
                                  const std::function<void(const ScalingRun&)>& on_run) {
  if (grid.variants.empty() || grid.slice_sizes.empty() || grid.step_budgets.empty()) {
    throw InvalidArgument("sweep grid has an empty axis");
  }
  if (train.empty() || test.empty()) throw InvalidArgument("sweep needs training and test frames");
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);

  std::vector<ScalingRun> runs;
  for (const auto& variant : grid.variants) {
    auto cfg = model::variant(variant);
    cfg.patch_time = grid.patch_time;
    cfg.patch_signals = grid.patch_signals;
    cfg.validate();
    for (auto size : grid.slice_sizes) {
      for (auto steps : grid.step_budgets) {
        const auto key = cell_key(variant, grid, size, steps, seed);
        const auto path = manifest_dir / ("run-" + key + ".manifest");
        if (std::filesystem::exists(path)) {
          const auto entries = io::read_manifest(path);
          const auto status = io::manifest_value(entries, "status");
          if (status == "done" || status == "diverged") {
            runs.push_back(run_from_entries(entries));
            if (on_run) on_run(runs.back());
            continue;
          }
        }
        // Slices are nested: every variant and budget sees the same prefix of one permutation.
        const auto slice = frames::make_slice(train, all, grid.kind, size, derive_seed(seed, 1));
        std::vector<frames::SensorFrame> subset;
        subset.reserve(slice.indices.size());
        for (auto i : slice.indices) subset.push_back(train[i]);

        ScalingRun r;
        r.key = key;
        r.variant = variant;
        r.kind = grid.kind;
        r.slice_size = size;
        r.data_hours = slice.hours();
        r.param_count = model::count_params(cfg);
        r.steps = steps;
        r.batch = grid.train.batch;
        r.compute = compute_proxy(cfg, grid.train.mask_ratio, grid.train.batch, steps);

        model::MaeModel m(cfg, derive_seed(seed, 2));
        auto hp = grid.train;
        hp.steps = steps;
        hp.warmup = std::min(hp.warmup, steps);
        hp.eval_every = 0;
        try {
          model::pretrain(m, subset, {}, hp, derive_seed(seed, 3));
          r.eval_loss = model::masked_eval_loss(m, test, grid.train.mask_ratio, masking::Strategy::Random,
                                                derive_seed(seed, 4));
          if (!std::isfinite(r.eval_loss)) throw TrainingDiverged("non-finite evaluation loss", steps);
        } catch (const TrainingDiverged& e) {
          r.diverged = true;
          r.eval_loss = std::numeric_limits<double>::quiet_NaN();
          r.note = e.what();
          std::replace(r.note.begin(), r.note.end(), '\n', ' ');
        }
        io::append_manifest(path, run_entries(r));
        runs.push_back(r);
        if (on_run) on_run(r);
      }
    }
  }
  return runs;
}

// --- Power law --------------------------------------------------------------

double PowerLawFit::predict(double compute) const { return a * std::pow(compute, b) + c; }

namespace {

struct LmState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();  // (log a', b, c), a' on normalized compute
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

class LogSpaceProblem {
 public:
  LogSpaceProblem(std::span<const double> compute, std::span<const double> loss, bool fix_c)
      : fix_c_(fix_c) {
    double mean_log = 0.0;
    for (double c : compute) mean_log += std::log(c);
    mean_log /= static_cast<double>(compute.size());
    log_scale_ = mean_log;
    for (std::size_t i = 0; i < compute.size(); ++i) {
      lx_.push_back(std::log(compute[i]) - mean_log);
      ly_.push_back(std::log(loss[i]));
    }
  }

  double log_scale() const { return log_scale_; }
  std::size_t n() const { return lx_.size(); }
  bool fix_c() const { return fix_c_; }

  double residual(const Eigen::Vector3d& p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n(); ++i) {
      const double f = std::exp(p[0] + p[1] * lx_[i]) + p[2];
      if (!(f > 0.0)) return std::numeric_limits<double>::infinity();
      const double r = ly_[i] - std::log(f);
      s += r * r;
    }
    return s;
  }

  /// Normal equations J^T J and J^T r at p.
  void normal(const Eigen::Vector3d& p, Eigen::Matrix3d& jtj, Eigen::Vector3d& jtr) const {
    jtj.setZero();
    jtr.setZero();
    for (std::size_t i = 0; i < n(); ++i) {
      const double t = std::exp(p[0] + p[1] * lx_[i]);
      const double f = t + p[2];
      const Eigen::Vector3d j(t / f, t * lx_[i] / f, fix_c_ ? 0.0 : 1.0 / f);
      const double r = ly_[i] - std::log(f);
      jtj += j * j.transpose();
      jtr += j * r;
    }
    if (fix_c_) jtj(2, 2) = 1.0;
  }

  /// Amplitude minimizing the log residual for fixed (b, c), exact when c = 0.
  double seed_log_amplitude(double b, double c) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n(); ++i) s += std::log(std::exp(ly_[i]) - c) - b * lx_[i];
    return s / static_cast<double>(n());
  }

 private:
  bool fix_c_;
  double log_scale_ = 0.0;
  std::vector<double> lx_, ly_;
};

LmState levenberg_marquardt(const LogSpaceProblem& prob, Eigen::Vector3d p, std::size_t max_iterations) {
  LmState st;
  st.p = p;
  st.residual = prob.residual(p);
  double lambda = 1e-3;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    st.iterations = it + 1;
    if (st.residual < 1e-28) {
      st.converged = true;
      break;
    }
    Eigen::Matrix3d jtj;
    Eigen::Vector3d jtr;
    prob.normal(st.p, jtj, jtr);
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::Matrix3d a = jtj;
      for (int k = 0; k < 3; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Eigen::Vector3d delta = a.ldlt().solve(jtr);
      Eigen::Vector3d cand = st.p + delta;
      if (prob.fix_c()) cand[2] = 0.0;
      cand[2] = std::max(cand[2], 0.0);
      const double res = prob.residual(cand);
      if (res < st.residual) {
        const double drop = st.residual - res;
        const double step = (cand - st.p).norm();
        st.p = cand;
        st.residual = res;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (drop <= 1e-14 * std::max(res, 1e-300) || step < 1e-13) st.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      // No direction lowers the residual: a (possibly bound-constrained) minimum.
      st.converged = true;
    }
    if (st.converged) break;
  }
  return st;
}

PowerLawFit to_fit(const LogSpaceProblem& prob, const LmState& st) {
  PowerLawFit f;
  const double log_a = st.p[0] - st.p[1] * prob.log_scale();
  f.a = std::exp(log_a);
  f.b = st.p[1];
  f.c = st.p[2];
  f.residual = st.residual;
  f.iterations = st.iterations;

  Eigen::Matrix3d jtj;
  Eigen::Vector3d jtr;
  prob.normal(st.p, jtj, jtr);
  const std::size_t nparam = prob.fix_c() ? 2 : 3;
  const double dof = static_cast<double>(prob.n() > nparam ? prob.n() - nparam : 1);
  const double sigma2 = st.residual / dof;
  Eigen::Matrix3d cov_p = Eigen::Matrix3d::Constant(std::numeric_limits<double>::quiet_NaN());
  Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
  if (lu.isInvertible()) cov_p = sigma2 * lu.inverse();
  if (prob.fix_c()) {
    cov_p.row(2).setZero();
    cov_p.col(2).setZero();
  }
  // d(a, b, c) / d(log a', b, c)
  Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
  g(0, 0) = f.a;
  g(0, 1) = -f.a * prob.log_scale();
  const Eigen::Matrix3d cov = g * cov_p * g.transpose();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f.covariance[static_cast<std::size_t>(r * 3 + c)] = cov(r, c);
  }
  return f;
}

}  // namespace

PowerLawFit fit_powerlaw(std::span<const double> compute, std::span<const double> loss, const FitOptions& options) {
  if (compute.size() != loss.size()) throw InvalidArgument("fit_powerlaw: compute and loss differ in length");
  if (compute.size() < 4) throw InvalidArgument("fit_powerlaw: need at least 4 points");
  for (std::size_t i = 0; i < compute.size(); ++i) {
    if (!(compute[i] > 0.0) || !(loss[i] > 0.0) || !std::isfinite(compute[i]) || !std::isfinite(loss[i])) {
      throw InvalidArgument("fit_powerlaw: compute and loss must be positive and finite");
    }
  }
  const double min_loss = *std::min_element(loss.begin(), loss.end());
  const double max_loss = *std::max_element(loss.begin(), loss.end());
  if (max_loss - min_loss <= 1e-12 * max_loss) {
    // A flat curve: every fit with a vanishing slope is exact.
    PowerLawFit f;
    f.a = min_loss;
    f.b = 0.0;
    f.c = 0.0;
    return f;
  }

  const LogSpaceProblem prob(compute, loss, options.fix_c_zero);
  std::vector<double> c_seeds = {0.0};
  if (!options.fix_c_zero) c_seeds.push_back(min_loss / 2.0);
  LmState best;
  for (int k = 0; k < 20; ++k) {
    const double b = -1.0 + 0.95 * static_cast<double>(k) / 19.0;
    for (double c : c_seeds) {
      const Eigen::Vector3d p(prob.seed_log_amplitude(b, c), b, c);
      const auto st = levenberg_marquardt(prob, p, options.max_iterations);
      if (st.residual < best.residual) best = st;
    }
  }
  const auto fit = to_fit(prob, best);
  if (!best.converged) {
    throw FitFailed("power-law fit did not converge in " + std::to_string(options.max_iterations) + " iterations",
                    fit);
  }
  double term_max = 0.0;
  for (double c : compute) term_max = std::max(term_max, fit.a * std::pow(c, fit.b));
  if (term_max <= 1e-9 * max_loss) {
    throw FitFailed("power-law term vanishes over the data; slope is not identifiable", fit);
  }
  return fit;
}

// --- Pareto front -----------------------------------------------------------

std::vector<std::size_t> pareto_indices(std::span<const double> compute, std::span<const double> loss) {
  if (compute.size() != loss.size()) throw InvalidArgument("pareto_indices: length mismatch");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < compute.size(); ++i) {
    if (!std::isnan(compute[i]) && !std::isnan(loss[i])) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
    return compute[x] != compute[y] ? compute[x] < compute[y] : loss[x] < loss[y];
  });
  std::vector<std::size_t> front;
  double best_loss = std::numeric_limits<double>::infinity();
  for (auto i : order) {
    if (loss[i] < best_loss) {
      front.push_back(i);
      best_loss = loss[i];
    } else if (!front.empty() && loss[i] == best_loss && compute[i] == compute[front.back()]) {
      front.push_back(i);  // exact duplicate of a front point
    }
  }
  return front;
}

std::vector<ScalingRun> pareto_front(const std::vector<ScalingRun>& runs) {
  std::vector<double> c, l;
  for (const auto& r : runs) {
    c.push_back(r.compute);
    l.push_back(r.diverged ? std::numeric_limits<double>::quiet_NaN() : r.eval_loss);
  }
  std::vector<ScalingRun> out;
  for (auto i : pareto_indices(c, l)) out.push_back(runs[i]);
  return out;
}

}  // namespace lsm::scaling
