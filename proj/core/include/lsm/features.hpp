#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lsm/common.hpp"
#include "lsm/synth.hpp"

namespace lsm::features {

// The 26 minute-level signals in sensor-clustered order.
enum Signal : std::size_t {
  kSclValue = 0,
  kSclSlope,
  kSkinTemp,
  kHeartRate,
  kRrPercentValid,
  kRrP80,
  kRrP20,
  kRrMedian,
  kRrMean,
  kShannonEntRr,
  kShannonEntRrDiffs,
  kPnn30,
  kRmssd,
  kSdnn,
  kOnWrist,
  kJerkAutocorr,
  kStepCount,
  kLogEnergy,
  kCovarianceCondition,
  kLogEnergyRatio,
  kZeroCrossStd,
  kZeroCrossMean,
  kRobustArmTilt,
  kKurtosis,
  kSleepCoefficient,
  kAltStd,
};

const std::array<std::string_view, kNumSignals>& signal_names();

struct FeatureConfig {
  double rr_outlier_fraction = 0.20;
  double rr_window_minutes = 5.0;
  double entropy_bin_ms = 10.0;
  double hpf_cutoff_hz = 0.25;
  double bpf_low_hz = 0.5;
  double bpf_high_hz = 11.0;
  double jerk_floor = -10.0;
  double step_refractory_s = 0.3;
  double step_min_peak = 0.01;  // g, on the band-passed magnitude
  int sleep_bins = 16;
  double sleep_bin_lo = 0.001;  // g, lowest log-scaled bin edge
  double sleep_bin_hi = 8.0;    // g, highest log-scaled bin edge
  double scl_median_minutes = 5.0;
  double scl_lowpass_hz = 0.05;
  double covariance_condition_cap = 1e4;
  double log_floor = 1e-10;     // energies are clamped here before log
};

struct HrvMetrics {
  double rr_mean = 0.0;
  double rr_median = 0.0;
  double rr_p20 = 0.0;
  double rr_p80 = 0.0;
  double shannon_ent_rr = 0.0;
  double shannon_ent_rr_diffs = 0.0;
  double sdnn = 0.0;
  double rmssd = 0.0;
  double pnn30 = 0.0;
  double percent_valid = 0.0;
  bool missing = false;  // fewer than two intervals
};

struct AccelFeatures {
  double jerk_autocorr_ratio = 0.0;
  double step_count = 0.0;
  double log_energy = 0.0;
  double covariance_condition = 1.0;
  double log_energy_ratio = 0.0;
  double zero_cross_std = 0.0;
  double zero_cross_mean = 0.0;
  double robust_arm_tilt = 0.0;
  double kurtosis = 0.0;
  double sleep_coefficient = 0.0;
};

struct CleanedRr {
  std::vector<double> valid_rr;
  double percent_valid = 0.0;
};

/// One row per minute; value ignored where missing is set.
struct FeatureRow {
  std::array<double, kNumSignals> values{};
  std::array<bool, kNumSignals> missing{};
};

// --- RR / HRV -------------------------------------------------------------

/// Median-filter outlier removal over one window of intervals: anything more
/// than `rr_outlier_fraction` of the window median away from it is dropped.
CleanedRr clean_rr(std::span<const double> rr_ms, const FeatureConfig& cfg = {});

HrvMetrics hrv_metrics(std::span<const double> valid_rr, const FeatureConfig& cfg = {});

/// Linear interpolation between order statistics, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Shannon entropy (nats) of a fixed-width histogram anchored at min(values).
double shannon_entropy(std::span<const double> values, double bin_width);

// --- Accelerometer --------------------------------------------------------

/// First-order high-pass, state initialised so a constant input yields 0.
std::vector<double> highpass_first_order(std::span<const double> x, double cutoff_hz,
                                         double sample_hz);

/// Second-order (single biquad) band-pass between low and high cutoffs.
std::vector<double> bandpass_second_order(std::span<const double> x, double low_hz,
                                          double high_hz, double sample_hz);

/// log(|acf(1)| / acf(0)) of the first difference of a signal; floor when either is zero.
double jerk_ratio(std::span<const double> principal, double floor_value);

AccelFeatures accel_features(std::span<const double> x, std::span<const double> y,
                             std::span<const double> z, const FeatureConfig& cfg = {});

// --- Skin conductance, temperature, altimeter -----------------------------

struct SclMinute {
  double value = 0.0;
  double slope = 0.0;  // microsiemens per minute
  bool missing = true;
};

/// Mean of consecutive groups of `factor` samples.
std::vector<double> boxcar_downsample(std::span<const double> x, std::size_t factor);

/// Centered running median with an odd window (edges use the available part).
std::vector<double> running_median(std::span<const double> x, std::size_t window);

/// Zero-phase first-order low-pass (forward then backward pass).
std::vector<double> lowpass_zero_phase(std::span<const double> x, double cutoff_hz,
                                       double sample_hz);

/// Least-squares line through evenly spaced samples spanning one minute.
/// Returns {center value, slope per minute}.
std::pair<double, double> fit_minute(std::span<const double> samples);

/// Per-minute tonic SCL from a 25 Hz stream: 1 Hz boxcar, 5-minute median,
/// low-pass, then a per-minute line fit. Invalid minutes split the stream into
/// independently smoothed runs.
std::vector<SclMinute> scl_track_25hz(std::span<const double> scl_25hz,
                                      std::span<const std::uint8_t> minute_valid,
                                      const FeatureConfig& cfg = {});

/// Same as above for a 200 Hz stream: boxcar 200 -> 25 Hz first.
std::vector<SclMinute> scl_features(std::span<const double> scl_200hz,
                                    std::span<const std::uint8_t> minute_valid,
                                    const FeatureConfig& cfg = {});

std::optional<double> temp_feature(std::span<const double> samples,
                                   std::span<const std::uint8_t> valid);

std::optional<double> altimeter_feature(std::span<const double> samples,
                                        std::span<const std::uint8_t> valid);

// --- Whole window ---------------------------------------------------------

std::vector<FeatureRow> featurize_window(const synth::RawSensorWindow& raw,
                                         const FeatureConfig& cfg = {});

}  // namespace lsm::features
