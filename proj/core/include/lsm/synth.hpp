#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lsm/common.hpp"

namespace lsm::synth {

inline constexpr int kAccelHz = 25;
inline constexpr int kSclHz = 25;
inline constexpr int kPressureHz = 1;
inline constexpr int kTempSamplesPerMinute = 6;
inline constexpr int kMinutesPerDay = 1440;

struct ActivitySegment {
  std::int64_t start_minute = 0;
  int duration_minutes = 0;
  Activity activity = Activity::None;
};

struct SubjectParams {
  std::string subject_id;
  double resting_hr = 65.0;       // beats/min, in [40, 100]
  double circadian_amp = 5.0;     // beats/min
  double circadian_phase = 0.0;   // minutes
  double hrv_scale = 40.0;        // ms
  double scl_baseline = 3.0;      // microsiemens
  double temp_baseline = 33.5;    // degrees C
  double pressure_baseline = 1010.0;  // hPa
  double activity_response = 1.0;     // scales HR offsets and motion amplitude
  double wrist_tilt = 0.3;            // radians, rotates gravity about the y axis
  std::vector<ActivitySegment> schedule;  // sorted, non-overlapping
  std::uint64_t seed = 0;
};

/// Fixed per-class template. Downstream classifiers rely on these being
/// distinct but overlapping.
struct ActivitySignature {
  double steps_per_minute;   // cadence of the periodic motion for gait classes
  double hr_offset;          // beats/min above resting at full intensity
  double accel_amplitude;    // g, periodic motion amplitude
  double motion_hz;          // frequency of the periodic motion
  double along_gravity;      // fraction of motion projected on gravity [0, 1]
  double alt_sigma;          // hPa per-second random-walk step during the class
  double burst_period_s;     // > 0: on/off amplitude modulation period
  double temp_offset;        // degrees C at full intensity
};

const ActivitySignature& signature(Activity a);

/// Per-stream Gaussian noise sigmas. `none()` disables every stochastic term.
struct NoiseModel {
  double hr_sigma = 1.5;          // beats/min, white
  double hr_drift_sigma = 0.15;   // beats/min per second, AR(1) innovation
  double rr_jitter = 1.0;         // multiplies the random part of HRV
  double accel_sigma = 0.015;     // g
  double fidget_rate = 0.02;      // per-second probability of an idle fidget
  double scl_sigma = 0.01;        // microsiemens
  double scl_drift_sigma = 0.002;
  double temp_sigma = 0.05;       // degrees C
  double pressure_sigma = 0.03;   // hPa

  static NoiseModel none();
};

struct RrEvent {
  std::int64_t timestamp_ms = 0;  // relative to window start
  double rr_ms = 0.0;
};

struct StreamValidity {
  std::vector<std::uint8_t> accel;     // per 25 Hz sample
  std::vector<std::uint8_t> rr;        // per event
  std::vector<std::uint8_t> hr;        // per second
  std::vector<std::uint8_t> scl;       // per 25 Hz sample
  std::vector<std::uint8_t> temp;      // per 10 s sample
  std::vector<std::uint8_t> pressure;  // per second
};

struct RawSensorWindow {
  std::string subject_id;
  std::int64_t start_minute = 0;
  int duration = static_cast<int>(kWindowMinutes);
  std::vector<double> accel_x, accel_y, accel_z;  // 25 Hz, g
  std::vector<RrEvent> rr_events;
  std::vector<double> hr_per_second;
  std::vector<double> scl_25hz;
  std::vector<double> temp_10s;
  std::vector<double> pressure_1hz;
  StreamValidity validity;
  std::vector<Activity> labels;  // per minute

  std::size_t seconds() const { return static_cast<std::size_t>(duration) * 60; }
};

struct MissingnessSpec {
  double wear_gap_rate = 0.0;
  double sensor_dropout_rate = 0.0;
};

struct PopulationOptions {
  int timeline_days = 7;
};

std::vector<SubjectParams> gen_population(int n_subjects, std::uint64_t seed,
                                          const PopulationOptions& options = {});

RawSensorWindow gen_raw_window(const SubjectParams& subject, std::int64_t start_minute,
                               int duration = static_cast<int>(kWindowMinutes),
                               const NoiseModel& noise = {});

RawSensorWindow inject_missingness(const RawSensorWindow& window, const MissingnessSpec& spec,
                                   std::uint64_t seed);

/// Per-minute labels copied from a schedule.
std::vector<Activity> labels_for(const SubjectParams& subject, std::int64_t start_minute,
                                 int duration);

/// Start minutes for `count` windows drawn uniformly over the subject timeline.
std::vector<std::int64_t> sample_window_starts(const SubjectParams& subject, int count,
                                               std::uint64_t seed,
                                               const PopulationOptions& options = {});

/// Start minutes for windows that each contain one full activity session, so
/// the window carries a class label. At most one window per session.
std::vector<std::int64_t> sample_labeled_window_starts(const SubjectParams& subject, int count,
                                                       std::uint64_t seed,
                                                       const PopulationOptions& options = {});

}  // namespace lsm::synth
