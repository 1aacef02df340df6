#include "lsm/features.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace lsm::features {

namespace {

constexpr double kPi = std::numbers::pi;

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double safe_log(double x, double floor_value) { return std::log(std::max(x, floor_value)); }

std::vector<double> minus_mean(std::span<const double> x) {
  const double m = mean_of(x);
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v -= m;
  return out;
}

bool all_set(std::span<const std::uint8_t> v, std::size_t begin, std::size_t end) {
  if (end > v.size() || begin >= end) return false;
  return std::all_of(v.begin() + static_cast<std::ptrdiff_t>(begin),
                     v.begin() + static_cast<std::ptrdiff_t>(end),
                     [](std::uint8_t b) { return b != 0; });
}

bool any_set(std::span<const std::uint8_t> v, std::size_t begin, std::size_t end) {
  end = std::min(end, v.size());
  if (begin >= end) return false;
  return std::any_of(v.begin() + static_cast<std::ptrdiff_t>(begin),
                     v.begin() + static_cast<std::ptrdiff_t>(end),
                     [](std::uint8_t b) { return b != 0; });
}

}  // namespace

const std::array<std::string_view, kNumSignals>& signal_names() {
  static const std::array<std::string_view, kNumSignals> names = {
      "scl_value",          "scl_slope",          "skin_temp",
      "heart_rate",         "rr_percent_valid",   "rr_p80",
      "rr_p20",             "rr_median",          "rr_mean",
      "shannon_ent_rr",     "shannon_ent_rr_diffs", "pnn30",
      "rmssd",              "sdnn",               "on_wrist",
      "jerk_autocorr",      "step_count",         "log_energy",
      "covariance_condition", "log_energy_ratio", "zero_cross_std",
      "zero_cross_mean",    "robust_arm_tilt",    "kurtosis",
      "sleep_coefficient",  "alt_std",
  };
  return names;
}

// --- RR / HRV -------------------------------------------------------------

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of empty list");
  if (p < 0.0 || p > 100.0) throw InvalidArgument("percentile outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double shannon_entropy(std::span<const double> values, double bin_width) {
  if (values.empty()) return 0.0;
  if (bin_width <= 0.0) throw InvalidArgument("entropy bin width must be > 0");
  const double lo = *std::min_element(values.begin(), values.end());
  std::map<long long, std::size_t> counts;
  for (double v : values) ++counts[static_cast<long long>(std::floor((v - lo) / bin_width))];
  const double n = static_cast<double>(values.size());
  double h = 0.0;
  for (const auto& [bin, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

CleanedRr clean_rr(std::span<const double> rr_ms, const FeatureConfig& cfg) {
  CleanedRr out;
  if (rr_ms.empty()) return out;
  const double med = percentile(std::vector<double>(rr_ms.begin(), rr_ms.end()), 50.0);
  const double limit = cfg.rr_outlier_fraction * med;
  for (double rr : rr_ms) {
    if (std::abs(rr - med) <= limit) out.valid_rr.push_back(rr);
  }
  out.percent_valid =
      100.0 * static_cast<double>(out.valid_rr.size()) / static_cast<double>(rr_ms.size());
  return out;
}

HrvMetrics hrv_metrics(std::span<const double> valid_rr, const FeatureConfig& cfg) {
  HrvMetrics m;
  if (valid_rr.size() < 2) {
    m.missing = true;
    return m;
  }
  const std::vector<double> rr(valid_rr.begin(), valid_rr.end());
  m.rr_mean = mean_of(rr);
  m.rr_median = percentile(rr, 50.0);
  m.rr_p20 = percentile(rr, 20.0);
  m.rr_p80 = percentile(rr, 80.0);
  m.sdnn = population_std(rr);

  std::vector<double> diffs(rr.size() - 1);
  for (std::size_t i = 1; i < rr.size(); ++i) diffs[i - 1] = rr[i] - rr[i - 1];
  double sq = 0.0;
  std::size_t over = 0;
  for (double d : diffs) {
    sq += d * d;
    if (std::abs(d) > 30.0) ++over;
  }
  m.rmssd = std::sqrt(sq / static_cast<double>(diffs.size()));
  m.pnn30 = 100.0 * static_cast<double>(over) / static_cast<double>(diffs.size());
  m.shannon_ent_rr = shannon_entropy(rr, cfg.entropy_bin_ms);
  m.shannon_ent_rr_diffs = shannon_entropy(diffs, cfg.entropy_bin_ms);
  m.percent_valid = 100.0;
  return m;
}

// --- Accelerometer --------------------------------------------------------

std::vector<double> highpass_first_order(std::span<const double> x, double cutoff_hz,
                                         double sample_hz) {
  std::vector<double> y(x.size(), 0.0);
  if (x.empty()) return y;
  const double rc = 1.0 / (2.0 * kPi * cutoff_hz);
  const double dt = 1.0 / sample_hz;
  const double alpha = rc / (rc + dt);
  for (std::size_t i = 1; i < x.size(); ++i) y[i] = alpha * (y[i - 1] + x[i] - x[i - 1]);
  return y;
}

std::vector<double> bandpass_second_order(std::span<const double> x, double low_hz,
                                          double high_hz, double sample_hz) {
  if (!(low_hz > 0.0 && high_hz > low_hz && high_hz < sample_hz / 2.0)) {
    throw InvalidArgument("band-pass cutoffs must satisfy 0 < low < high < nyquist");
  }
  // Constant 0 dB peak gain band-pass biquad centred on the geometric mean.
  const double f0 = std::sqrt(low_hz * high_hz);
  const double q = f0 / (high_hz - low_hz);
  const double w0 = 2.0 * kPi * f0 / sample_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = b0 * x[i] + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x[i];
    y2 = y1;
    y1 = v;
    y[i] = v;
  }
  return y;
}

double jerk_ratio(std::span<const double> principal, double floor_value) {
  if (principal.size() < 3) return floor_value;
  std::vector<double> d(principal.size() - 1);
  for (std::size_t i = 1; i < principal.size(); ++i) d[i - 1] = principal[i] - principal[i - 1];
  double acf0 = 0.0, acf1 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    acf0 += d[i] * d[i];
    if (i + 1 < d.size()) acf1 += d[i] * d[i + 1];
  }
  if (acf0 <= 0.0 || acf1 == 0.0) return floor_value;
  return std::log(std::abs(acf1) / acf0);
}

AccelFeatures accel_features(std::span<const double> x, std::span<const double> y,
                             std::span<const double> z, const FeatureConfig& cfg) {
  if (x.size() != y.size() || x.size() != z.size()) {
    throw InvalidArgument("accel axes differ in length");
  }
  const std::size_t n = x.size();
  const double fs = synth::kAccelHz;
  AccelFeatures f;
  if (n < 4) {
    f.jerk_autocorr_ratio = cfg.jerk_floor;
    return f;
  }

  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::sqrt(x[i] * x[i] + y[i] * y[i] + z[i] * z[i]);
  const std::vector<double> hpf = highpass_first_order(mag, cfg.hpf_cutoff_hz, fs);

  const auto bx = bandpass_second_order(minus_mean(x), cfg.bpf_low_hz, cfg.bpf_high_hz, fs);
  const auto by = bandpass_second_order(minus_mean(y), cfg.bpf_low_hz, cfg.bpf_high_hz, fs);
  const auto bz = bandpass_second_order(minus_mean(z), cfg.bpf_low_hz, cfg.bpf_high_hz, fs);

  Eigen::Matrix<double, Eigen::Dynamic, 3> b(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    b(r, 0) = bx[i];
    b(r, 1) = by[i];
    b(r, 2) = bz[i];
  }
  const Eigen::RowVector3d mu = b.colwise().mean();
  const Eigen::MatrixXd centered = b.rowwise() - mu;
  const Eigen::Matrix3d cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
  const Eigen::Vector3d lead = eig.eigenvectors().col(2);
  const Eigen::VectorXd pc_vec = centered * lead;
  const std::vector<double> pc(pc_vec.data(), pc_vec.data() + pc_vec.size());

  f.jerk_autocorr_ratio = jerk_ratio(pc, cfg.jerk_floor);

  const double lmax = evals(2), lmin = evals(0);
  if (lmax <= 1e-300) {
    f.covariance_condition = 1.0;
  } else if (lmin <= lmax / cfg.covariance_condition_cap) {
    f.covariance_condition = cfg.covariance_condition_cap;
  } else {
    f.covariance_condition = lmax / lmin;
  }

  double e_hpf = 0.0, e_pc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e_hpf += hpf[i] * hpf[i];
    e_pc += pc[i] * pc[i];
  }
  f.log_energy = safe_log(e_hpf, cfg.log_floor);
  f.log_energy_ratio = safe_log(e_pc, cfg.log_floor) - safe_log(e_hpf, cfg.log_floor);

  // Intervals between sign changes of the principal component.
  std::vector<double> crossings;
  for (std::size_t i = 1; i < n; ++i) {
    if ((pc[i - 1] < 0.0 && pc[i] >= 0.0) || (pc[i - 1] >= 0.0 && pc[i] < 0.0)) {
      crossings.push_back(static_cast<double>(i) / fs);
    }
  }
  if (crossings.size() >= 2) {
    std::vector<double> gaps(crossings.size() - 1);
    for (std::size_t i = 1; i < crossings.size(); ++i) gaps[i - 1] = crossings[i] - crossings[i - 1];
    f.zero_cross_mean = mean_of(gaps);
    f.zero_cross_std = population_std(gaps);
  } else {
    f.zero_cross_mean = static_cast<double>(n) / fs;
    f.zero_cross_std = 0.0;
  }

  // Steps: refractory peak picking on the band-passed magnitude.
  {
    const auto bm = bandpass_second_order(minus_mean(mag), cfg.bpf_low_hz, cfg.bpf_high_hz, fs);
    const auto refractory = static_cast<std::size_t>(std::ceil(cfg.step_refractory_s * fs));
    std::size_t last = 0;
    bool have_last = false;
    std::size_t steps = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (bm[i] > cfg.step_min_peak && bm[i] > bm[i - 1] && bm[i] >= bm[i + 1]) {
        if (!have_last || i - last >= refractory) {
          ++steps;
          last = i;
          have_last = true;
        }
      }
    }
    f.step_count = static_cast<double>(steps);
  }

  double tilt = 0.0;
  for (std::size_t i = 0; i < n; ++i) tilt += std::sqrt(x[i] * x[i] + z[i] * z[i]);
  f.robust_arm_tilt = safe_log(tilt / static_cast<double>(n), cfg.log_floor);

  {
    const double m = mean_of(mag);
    double m2 = 0.0, m4 = 0.0;
    for (double v : mag) {
      const double d = (v - m) * (v - m);
      m2 += d;
      m4 += d * d;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    f.kurtosis = m2 > 1e-300 ? m4 / (m2 * m2) : 0.0;
  }

  // Sleep coefficient: per-second summed axis range mapped to log-spaced bins.
  {
    const auto per_sec = static_cast<std::size_t>(fs);
    const double span = std::log(cfg.sleep_bin_hi / cfg.sleep_bin_lo);
    double total = 0.0;
    for (std::size_t s = 0; s + per_sec <= n; s += per_sec) {
      double range = 0.0;
      for (auto axis : {x, y, z}) {
        const auto [lo, hi] = std::minmax_element(axis.begin() + static_cast<std::ptrdiff_t>(s),
                                                  axis.begin() + static_cast<std::ptrdiff_t>(s + per_sec));
        range += *hi - *lo;
      }
      double bin = 0.0;
      if (range > cfg.sleep_bin_lo) {
        bin = std::floor(cfg.sleep_bins * std::log(range / cfg.sleep_bin_lo) / span);
        bin = std::clamp(bin, 0.0, static_cast<double>(cfg.sleep_bins - 1));
      }
      total += bin;
    }
    f.sleep_coefficient = total;
  }
  return f;
}

// --- Skin conductance, temperature, altimeter -----------------------------

std::vector<double> boxcar_downsample(std::span<const double> x, std::size_t factor) {
  if (factor == 0) throw InvalidArgument("boxcar factor must be > 0");
  std::vector<double> out(x.size() / factor);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mean_of(x.subspan(i * factor, factor));
  }
  return out;
}

std::vector<double> running_median(std::span<const double> x, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw InvalidArgument("median window must be odd");
  const std::size_t half = window / 2;
  std::vector<double> out(x.size());
  std::vector<double> buf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size(), i + half + 1);
    buf.assign(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi));
    const std::size_t mid = buf.size() / 2;
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
    double med = buf[mid];
    if (buf.size() % 2 == 0) {
      const double below = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid));
      med = 0.5 * (med + below);
    }
    out[i] = med;
  }
  return out;
}

std::vector<double> lowpass_zero_phase(std::span<const double> x, double cutoff_hz,
                                       double sample_hz) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  const double rc = 1.0 / (2.0 * kPi * cutoff_hz);
  const double dt = 1.0 / sample_hz;
  const double a = dt / (rc + dt);
  for (std::size_t i = 1; i < y.size(); ++i) y[i] = y[i - 1] + a * (y[i] - y[i - 1]);
  for (std::size_t i = y.size() - 1; i-- > 0;) y[i] = y[i + 1] + a * (y[i] - y[i + 1]);
  return y;
}

std::pair<double, double> fit_minute(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0) throw InvalidArgument("fit_minute: no samples");
  if (n == 1) return {samples[0], 0.0};
  // Sample i sits at i/n minutes; the fit is evaluated at the minute centre.
  double st = 0, sv = 0, stt = 0, stv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    st += t;
    sv += samples[i];
    stt += t * t;
    stv += t * samples[i];
  }
  const double dn = static_cast<double>(n);
  const double slope = (dn * stv - st * sv) / (dn * stt - st * st);
  const double intercept = (sv - slope * st) / dn;
  return {intercept + slope * 0.5, slope};
}

std::vector<SclMinute> scl_track_25hz(std::span<const double> scl_25hz,
                                      std::span<const std::uint8_t> minute_valid,
                                      const FeatureConfig& cfg) {
  const std::size_t minutes = minute_valid.size();
  const std::size_t per_minute = 60 * synth::kSclHz;
  if (scl_25hz.size() < minutes * per_minute) throw InvalidArgument("SCL stream too short");
  std::vector<SclMinute> out(minutes);
  auto median_len = static_cast<std::size_t>(std::lround(cfg.scl_median_minutes * 60.0));
  if (median_len % 2 == 0) ++median_len;

  std::size_t m = 0;
  while (m < minutes) {
    if (!minute_valid[m]) {
      ++m;
      continue;
    }
    std::size_t end = m;
    while (end < minutes && minute_valid[end]) ++end;
    const auto run = scl_25hz.subspan(m * per_minute, (end - m) * per_minute);
    const auto per_sec = boxcar_downsample(run, synth::kSclHz);
    const auto med = running_median(per_sec, median_len);
    const auto smooth = lowpass_zero_phase(med, cfg.scl_lowpass_hz, 1.0);
    for (std::size_t k = m; k < end; ++k) {
      const auto [value, slope] = fit_minute(std::span<const double>(smooth).subspan((k - m) * 60, 60));
      out[k] = {value, slope, false};
    }
    m = end;
  }
  return out;
}

std::vector<SclMinute> scl_features(std::span<const double> scl_200hz,
                                    std::span<const std::uint8_t> minute_valid,
                                    const FeatureConfig& cfg) {
  const auto at_25 = boxcar_downsample(scl_200hz, 8);
  return scl_track_25hz(at_25, minute_valid, cfg);
}

std::optional<double> temp_feature(std::span<const double> samples,
                                   std::span<const std::uint8_t> valid) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i < valid.size() && !valid[i]) continue;
    sum += samples[i];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> altimeter_feature(std::span<const double> samples,
                                        std::span<const std::uint8_t> valid) {
  std::vector<double> kept;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i < valid.size() && !valid[i]) continue;
    kept.push_back(samples[i]);
  }
  if (kept.size() < 2) return std::nullopt;
  return population_std(kept);
}

// --- Whole window ---------------------------------------------------------

std::vector<FeatureRow> featurize_window(const synth::RawSensorWindow& raw,
                                         const FeatureConfig& cfg) {
  const auto minutes = static_cast<std::size_t>(raw.duration);
  const auto& v = raw.validity;
  const std::size_t acc_pm = 60 * synth::kAccelHz;
  const std::size_t scl_pm = 60 * synth::kSclHz;
  const std::size_t tmp_pm = synth::kTempSamplesPerMinute;
  if (raw.accel_x.size() != minutes * acc_pm || raw.hr_per_second.size() != minutes * 60 ||
      raw.scl_25hz.size() != minutes * scl_pm || raw.temp_10s.size() != minutes * tmp_pm ||
      raw.pressure_1hz.size() != minutes * 60 || v.rr.size() != raw.rr_events.size()) {
    throw InvalidArgument("featurize_window: stream lengths do not match duration");
  }

  std::vector<FeatureRow> rows(minutes);
  for (auto& r : rows) r.missing.fill(true);

  std::vector<std::uint8_t> scl_ok(minutes);
  for (std::size_t m = 0; m < minutes; ++m) scl_ok[m] = all_set(v.scl, m * scl_pm, (m + 1) * scl_pm);
  const auto scl = scl_track_25hz(raw.scl_25hz, scl_ok, cfg);

  // RR events bucketed by minute for the sliding context.
  std::vector<std::vector<std::size_t>> rr_by_minute(minutes);
  for (std::size_t i = 0; i < raw.rr_events.size(); ++i) {
    const auto mm = static_cast<std::size_t>(raw.rr_events[i].timestamp_ms / 60000);
    if (mm < minutes) rr_by_minute[mm].push_back(i);
  }
  const auto half_ctx = static_cast<std::size_t>(std::floor(cfg.rr_window_minutes / 2.0));

  for (std::size_t m = 0; m < minutes; ++m) {
    auto& row = rows[m];
    auto set = [&](Signal s, double value) {
      row.values[s] = value;
      row.missing[s] = false;
    };

    if (!scl[m].missing) {
      set(kSclValue, scl[m].value);
      set(kSclSlope, scl[m].slope);
    }

    if (auto t = temp_feature(std::span<const double>(raw.temp_10s).subspan(m * tmp_pm, tmp_pm),
                              std::span<const std::uint8_t>(v.temp).subspan(m * tmp_pm, tmp_pm))) {
      set(kSkinTemp, *t);
    }

    {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t s = m * 60; s < (m + 1) * 60; ++s) {
        if (v.hr[s]) {
          sum += raw.hr_per_second[s];
          ++n;
        }
      }
      if (n > 0) set(kHeartRate, sum / static_cast<double>(n));
    }

    const bool ppg_here = any_set(v.hr, m * 60, (m + 1) * 60);
    if (ppg_here) {
      const std::size_t lo = m >= half_ctx ? m - half_ctx : 0;
      const std::size_t hi = std::min(minutes, m + half_ctx + 1);
      std::vector<double> ctx;
      std::size_t total = 0;
      for (std::size_t k = lo; k < hi; ++k) {
        for (std::size_t i : rr_by_minute[k]) {
          ++total;
          if (v.rr[i]) ctx.push_back(raw.rr_events[i].rr_ms);
        }
      }
      const CleanedRr cleaned = clean_rr(ctx, cfg);
      const HrvMetrics h = hrv_metrics(cleaned.valid_rr, cfg);
      if (!h.missing && total > 0) {
        set(kRrPercentValid,
            100.0 * static_cast<double>(cleaned.valid_rr.size()) / static_cast<double>(total));
        set(kRrP80, h.rr_p80);
        set(kRrP20, h.rr_p20);
        set(kRrMedian, h.rr_median);
        set(kRrMean, h.rr_mean);
        set(kShannonEntRr, h.shannon_ent_rr);
        set(kShannonEntRrDiffs, h.shannon_ent_rr_diffs);
        set(kPnn30, h.pnn30);
        set(kRmssd, h.rmssd);
        set(kSdnn, h.sdnn);
      }
    }

    // On-wrist: only missing when the device recorded nothing at all that minute.
    const bool any_stream = ppg_here || any_set(v.accel, m * acc_pm, (m + 1) * acc_pm) ||
                            any_set(v.scl, m * scl_pm, (m + 1) * scl_pm) ||
                            any_set(v.temp, m * tmp_pm, (m + 1) * tmp_pm) ||
                            any_set(v.pressure, m * 60, (m + 1) * 60);
    if (any_stream) {
      const bool first = any_set(v.hr, m * 60, m * 60 + 30);
      const bool second = any_set(v.hr, m * 60 + 30, (m + 1) * 60);
      set(kOnWrist, first && second ? 1.0 : 0.0);
    }

    if (all_set(v.accel, m * acc_pm, (m + 1) * acc_pm)) {
      const auto sx = std::span<const double>(raw.accel_x).subspan(m * acc_pm, acc_pm);
      const auto sy = std::span<const double>(raw.accel_y).subspan(m * acc_pm, acc_pm);
      const auto sz = std::span<const double>(raw.accel_z).subspan(m * acc_pm, acc_pm);
      const AccelFeatures a = accel_features(sx, sy, sz, cfg);
      set(kJerkAutocorr, a.jerk_autocorr_ratio);
      set(kStepCount, a.step_count);
      set(kLogEnergy, a.log_energy);
      set(kCovarianceCondition, a.covariance_condition);
      set(kLogEnergyRatio, a.log_energy_ratio);
      set(kZeroCrossStd, a.zero_cross_std);
      set(kZeroCrossMean, a.zero_cross_mean);
      set(kRobustArmTilt, a.robust_arm_tilt);
      set(kKurtosis, a.kurtosis);
      set(kSleepCoefficient, a.sleep_coefficient);
    }

    if (auto alt = altimeter_feature(std::span<const double>(raw.pressure_1hz).subspan(m * 60, 60),
                                     std::span<const std::uint8_t>(v.pressure).subspan(m * 60, 60))) {
      set(kAltStd, *alt);
    }
  }
  return rows;
}

}  // namespace lsm::features
