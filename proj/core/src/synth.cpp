#include "lsm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace lsm::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Indexed by Activity code; entry 0 (None) is the resting template.
// steps, hr, amp, hz, along_g, alt, burst, temp
constexpr std::array<ActivitySignature, kNumActivities + 1> kSignatures = {{
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},             // None
    {0.0, 45.0, 0.10, 1.35, 0.15, 0.010, 0.0, -0.4},      // Biking
    {130.0, 50.0, 0.30, 130.0 / 60.0, 0.70, 0.001, 0.0, -0.3},  // Elliptical
    {95.0, 75.0, 0.80, 2.4, 0.65, 0.003, 40.0, -0.2},        // HIIT
    {8.0, 28.0, 0.35, 0.45, 0.50, 0.001, 60.0, -0.1},     // Strength training
    {0.0, 55.0, 0.55, 0.55, 0.20, 0.000, 0.0, -1.5},      // Swimming
    {165.0, 72.0, 0.75, 165.0 / 60.0, 0.80, 0.006, 0.0, -0.5},  // Running
    {105.0, 25.0, 0.25, 105.0 / 60.0, 0.75, 0.004, 0.0, -0.2},  // Walking
    {4.0, 24.0, 0.45, 0.30, 0.55, 0.000, 90.0, -0.1},     // Weightlifting
}};

std::string make_subject_id(std::uint64_t seed, int index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "s%04llx-%05d",
                static_cast<unsigned long long>(seed & 0xFFFF), index);
  return buf;
}

// First-order response of an indicator sequence (per second) with separate
// rise and decay time constants.
std::vector<double> smooth_envelope(const std::vector<double>& indicator, double tau_on_s,
                                    double tau_off_s) {
  std::vector<double> env(indicator.size());
  double state = indicator.empty() ? 0.0 : indicator.front();
  const double a_on = 1.0 - std::exp(-1.0 / tau_on_s);
  const double a_off = 1.0 - std::exp(-1.0 / tau_off_s);
  for (std::size_t i = 0; i < indicator.size(); ++i) {
    const double target = indicator[i];
    state += (target > state ? a_on : a_off) * (target - state);
    env[i] = state;
  }
  return env;
}

void invalidate_range(std::vector<std::uint8_t>& mask, std::size_t begin, std::size_t end) {
  end = std::min(end, mask.size());
  for (std::size_t i = begin; i < end; ++i) mask[i] = 0;
}

enum class StreamGroup { Accel, Ppg, Scl, Temp, Pressure };

void invalidate_minute(RawSensorWindow& w, StreamGroup group, std::size_t minute) {
  auto& v = w.validity;
  switch (group) {
    case StreamGroup::Accel:
      invalidate_range(v.accel, minute * 60 * kAccelHz, (minute + 1) * 60 * kAccelHz);
      break;
    case StreamGroup::Ppg: {
      invalidate_range(v.hr, minute * 60, (minute + 1) * 60);
      const std::int64_t lo = static_cast<std::int64_t>(minute) * 60000;
      const std::int64_t hi = lo + 60000;
      for (std::size_t i = 0; i < w.rr_events.size(); ++i) {
        const auto ts = w.rr_events[i].timestamp_ms;
        if (ts >= lo && ts < hi) v.rr[i] = 0;
      }
      break;
    }
    case StreamGroup::Scl:
      invalidate_range(v.scl, minute * 60 * kSclHz, (minute + 1) * 60 * kSclHz);
      break;
    case StreamGroup::Temp:
      invalidate_range(v.temp, minute * kTempSamplesPerMinute,
                       (minute + 1) * kTempSamplesPerMinute);
      break;
    case StreamGroup::Pressure:
      invalidate_range(v.pressure, minute * 60 * kPressureHz, (minute + 1) * 60 * kPressureHz);
      break;
  }
}

}  // namespace

const ActivitySignature& signature(Activity a) {
  return kSignatures.at(static_cast<std::size_t>(a));
}

NoiseModel NoiseModel::none() {
  NoiseModel n;
  n.hr_sigma = 0.0;
  n.hr_drift_sigma = 0.0;
  n.rr_jitter = 0.0;
  n.accel_sigma = 0.0;
  n.fidget_rate = 0.0;
  n.scl_sigma = 0.0;
  n.scl_drift_sigma = 0.0;
  n.temp_sigma = 0.0;
  n.pressure_sigma = 0.0;
  return n;
}

std::vector<SubjectParams> gen_population(int n_subjects, std::uint64_t seed,
                                          const PopulationOptions& options) {
  if (n_subjects < 1) throw InvalidArgument("gen_population: n_subjects must be >= 1");
  if (options.timeline_days < 1) throw InvalidArgument("gen_population: timeline_days < 1");

  std::vector<SubjectParams> out;
  out.reserve(static_cast<std::size_t>(n_subjects));
  for (int i = 0; i < n_subjects; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    SubjectParams p;
    p.subject_id = make_subject_id(seed, i);
    p.seed = derive_seed(seed ^ 0xA5A5A5A5ULL, static_cast<std::uint64_t>(i));
    p.resting_hr = std::clamp(rng.normal(65.0, 7.0), 45.0, 90.0);
    p.circadian_amp = rng.uniform(2.0, 8.0);
    p.circadian_phase = rng.uniform(0.0, kMinutesPerDay);
    p.hrv_scale = rng.uniform(20.0, 60.0);
    p.scl_baseline = rng.uniform(1.0, 8.0);
    p.temp_baseline = rng.uniform(32.0, 35.0);
    p.pressure_baseline = rng.uniform(985.0, 1030.0);
    p.activity_response = rng.uniform(0.8, 1.2);
    p.wrist_tilt = rng.uniform(0.0, 0.6);

    // Each subject favours two classes; habits give subject-level structure.
    const int fav_a = static_cast<int>(rng.uniform_int(kNumActivities));
    int fav_b = static_cast<int>(rng.uniform_int(kNumActivities - 1));
    if (fav_b >= fav_a) ++fav_b;

    for (int day = 0; day < options.timeline_days; ++day) {
      const double u = rng.uniform();
      const int sessions = u < 0.15 ? 0 : (u < 0.6 ? 1 : 2);
      for (int s = 0; s < sessions; ++s) {
        ActivitySegment seg;
        seg.start_minute = static_cast<std::int64_t>(day) * kMinutesPerDay + 420 +
                           static_cast<std::int64_t>(rng.uniform_int(840));
        seg.duration_minutes = 30 + static_cast<int>(rng.uniform_int(91));
        int cls;
        if (rng.bernoulli(0.75)) {
          cls = rng.bernoulli(0.5) ? fav_a : fav_b;
        } else {
          cls = static_cast<int>(rng.uniform_int(kNumActivities));
        }
        seg.activity = activity_from_index(cls);
        const bool overlaps = std::any_of(p.schedule.begin(), p.schedule.end(), [&](const auto& o) {
          return seg.start_minute < o.start_minute + o.duration_minutes + 30 &&
                 o.start_minute < seg.start_minute + seg.duration_minutes + 30;
        });
        if (!overlaps) p.schedule.push_back(seg);
      }
    }
    std::sort(p.schedule.begin(), p.schedule.end(),
              [](const auto& a, const auto& b) { return a.start_minute < b.start_minute; });
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Activity> labels_for(const SubjectParams& subject, std::int64_t start_minute,
                                 int duration) {
  std::vector<Activity> labels(static_cast<std::size_t>(std::max(duration, 0)), Activity::None);
  for (const auto& seg : subject.schedule) {
    const std::int64_t lo = std::max(seg.start_minute, start_minute);
    const std::int64_t hi = std::min(seg.start_minute + seg.duration_minutes,
                                     start_minute + duration);
    for (std::int64_t m = lo; m < hi; ++m) {
      labels[static_cast<std::size_t>(m - start_minute)] = seg.activity;
    }
  }
  return labels;
}

RawSensorWindow gen_raw_window(const SubjectParams& subject, std::int64_t start_minute,
                               int duration, const NoiseModel& noise) {
  if (duration <= 0) throw InvalidArgument("gen_raw_window: duration must be > 0");

  Rng rng(derive_seed(subject.seed, static_cast<std::uint64_t>(start_minute) * 2654435761ULL));
  RawSensorWindow w;
  w.subject_id = subject.subject_id;
  w.start_minute = start_minute;
  w.duration = duration;
  w.labels = labels_for(subject, start_minute, duration);

  const std::size_t n_sec = w.seconds();
  const std::size_t n_accel = n_sec * kAccelHz;

  // Per-second activity indicator and smoothed physiological envelope.
  std::vector<double> indicator(n_sec);
  for (std::size_t s = 0; s < n_sec; ++s) {
    indicator[s] = w.labels[s / 60] == Activity::None ? 0.0 : 1.0;
  }
  const std::vector<double> env = smooth_envelope(indicator, 90.0, 180.0);

  auto minute_abs = [&](double sec) { return static_cast<double>(start_minute) + sec / 60.0; };
  auto circadian = [&](double sec) {
    return std::sin(kTwoPi * (minute_abs(sec) - subject.circadian_phase) / kMinutesPerDay);
  };

  // Heart rate: resting + circadian + activity offset + AR(1) drift + white noise.
  std::vector<double> hr_clean(n_sec);
  w.hr_per_second.resize(n_sec);
  double drift = 0.0;
  for (std::size_t s = 0; s < n_sec; ++s) {
    const auto& sig = signature(w.labels[s / 60]);
    const double offset = subject.activity_response * sig.hr_offset * env[s];
    drift = 0.995 * drift + noise.hr_drift_sigma * rng.normal();
    const double base = subject.resting_hr + subject.circadian_amp * circadian(double(s)) +
                        offset + drift;
    hr_clean[s] = std::max(base, 30.0);
    w.hr_per_second[s] = hr_clean[s] + noise.hr_sigma * rng.normal();
  }

  // RR events consistent with the clean HR, plus respiratory modulation and jitter.
  {
    const double total_ms = static_cast<double>(n_sec) * 1000.0;
    double t = 0.0;
    while (true) {
      const auto s = std::min(static_cast<std::size_t>(t / 1000.0), n_sec - 1);
      const double hrv = subject.hrv_scale * (1.0 - 0.6 * env[s]);
      double rr = 60000.0 / hr_clean[s];
      rr += 0.7 * hrv * std::sin(kTwoPi * t / 4000.0);
      rr += 0.5 * hrv * noise.rr_jitter * rng.normal();
      rr = std::clamp(rr, 300.0, 2000.0);
      t += rr;
      if (t >= total_ms) break;
      w.rr_events.push_back({static_cast<std::int64_t>(std::llround(t)), rr});
    }
  }

  // Accelerometer at 25 Hz.
  w.accel_x.resize(n_accel);
  w.accel_y.resize(n_accel);
  w.accel_z.resize(n_accel);
  {
    double posture = 0.0;
    double fidget_left = 0.0;
    std::array<double, 3> fidget_dir{0.0, 0.0, 0.0};
    const double phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t s = 0; s < n_sec; ++s) {
      const Activity act = w.labels[s / 60];
      const auto& sig = signature(act);
      if (s % 60 == 0 && act == Activity::None) {
        posture = std::clamp(posture + 0.15 * rng.normal(), -0.8, 0.8);
      }
      if (act == Activity::None && fidget_left <= 0.0 && rng.bernoulli(noise.fidget_rate)) {
        fidget_left = 1.0 + rng.uniform();
        for (auto& d : fidget_dir) d = 0.1 * rng.normal();
      }
      for (int k = 0; k < kAccelHz; ++k) {
        const std::size_t i = s * kAccelHz + static_cast<std::size_t>(k);
        const double t = static_cast<double>(i) / kAccelHz;
        double tilt = subject.wrist_tilt + posture;
        if (act == Activity::Swimming) tilt += 1.2 * std::sin(kTwoPi * sig.motion_hz * t + phase);
        const double gx = std::sin(tilt);
        const double gz = std::cos(tilt);
        double ax = gx, ay = 0.0, az = gz;
        if (act != Activity::None) {
          double amp = sig.accel_amplitude * subject.activity_response;
          if (sig.burst_period_s > 0.0 &&
              std::fmod(t + phase, sig.burst_period_s) > 0.5 * sig.burst_period_s) {
            amp *= 0.25;
          }
          const double wave = std::sin(kTwoPi * sig.motion_hz * t + phase) +
                              0.25 * std::sin(2.0 * kTwoPi * sig.motion_hz * t + 2.0 * phase);
          const double along = sig.along_gravity;
          const double across = std::sqrt(1.0 - along * along);
          ax += amp * wave * along * gx;
          az += amp * wave * along * gz;
          ay += amp * wave * across;
          if (act == Activity::Biking) {
            ax += 0.04 * rng.normal();
            ay += 0.04 * rng.normal();
          }
        } else if (fidget_left > 0.0) {
          ax += fidget_dir[0] * std::sin(kTwoPi * 3.0 * t);
          ay += fidget_dir[1] * std::sin(kTwoPi * 3.0 * t);
          az += fidget_dir[2] * std::sin(kTwoPi * 3.0 * t);
        }
        w.accel_x[i] = ax + noise.accel_sigma * rng.normal();
        w.accel_y[i] = ay + noise.accel_sigma * rng.normal();
        w.accel_z[i] = az + noise.accel_sigma * rng.normal();
      }
      if (fidget_left > 0.0) fidget_left -= 1.0;
    }
  }

  // Skin conductance: tonic level, slow drift and sparse phasic responses.
  {
    std::vector<double> per_sec(n_sec);
    double level_drift = 0.0;
    double phasic = 0.0;
    for (std::size_t s = 0; s < n_sec; ++s) {
      level_drift = 0.999 * level_drift + noise.scl_drift_sigma * rng.normal();
      phasic *= std::exp(-1.0 / 4.0);
      if (noise.scl_sigma > 0.0 && rng.bernoulli(2.0 / 60.0)) phasic += rng.uniform(0.02, 0.2);
      per_sec[s] = subject.scl_baseline * (1.0 + 0.1 * circadian(double(s))) + level_drift +
                   phasic + 1.0 * env[s];
    }
    w.scl_25hz.resize(n_sec * kSclHz);
    for (std::size_t s = 0; s < n_sec; ++s) {
      const double a = per_sec[s];
      const double b = per_sec[std::min(s + 1, n_sec - 1)];
      for (int k = 0; k < kSclHz; ++k) {
        const double f = static_cast<double>(k) / kSclHz;
        w.scl_25hz[s * kSclHz + static_cast<std::size_t>(k)] =
            a + f * (b - a) + noise.scl_sigma * rng.normal();
      }
    }
  }

  // Skin temperature every 10 s.
  {
    const std::size_t n_temp = static_cast<std::size_t>(duration) * kTempSamplesPerMinute;
    w.temp_10s.resize(n_temp);
    double tdrift = 0.0;
    for (std::size_t j = 0; j < n_temp; ++j) {
      const std::size_t s = j * 10;
      const auto& sig = signature(w.labels[s / 60]);
      tdrift = 0.99 * tdrift + 0.3 * noise.temp_sigma * rng.normal();
      w.temp_10s[j] = subject.temp_baseline + 0.3 * circadian(double(s)) +
                      sig.temp_offset * env[s] + tdrift + noise.temp_sigma * rng.normal();
    }
  }

  // Barometric pressure at 1 Hz; altitude random walk while active.
  {
    w.pressure_1hz.resize(n_sec);
    double alt = 0.0;
    for (std::size_t s = 0; s < n_sec; ++s) {
      const auto& sig = signature(w.labels[s / 60]);
      alt = 0.9995 * alt + sig.alt_sigma * rng.normal();
      const double weather = 3.0 * std::sin(kTwoPi * minute_abs(double(s)) / (4.0 * kMinutesPerDay));
      w.pressure_1hz[s] = subject.pressure_baseline + weather + alt +
                          noise.pressure_sigma * rng.normal();
    }
  }

  w.validity.accel.assign(n_accel, 1);
  w.validity.rr.assign(w.rr_events.size(), 1);
  w.validity.hr.assign(n_sec, 1);
  w.validity.scl.assign(w.scl_25hz.size(), 1);
  w.validity.temp.assign(w.temp_10s.size(), 1);
  w.validity.pressure.assign(n_sec, 1);
  return w;
}

RawSensorWindow inject_missingness(const RawSensorWindow& window, const MissingnessSpec& spec,
                                   std::uint64_t seed) {
  if (spec.wear_gap_rate < 0.0 || spec.wear_gap_rate > 1.0 || spec.sensor_dropout_rate < 0.0 ||
      spec.sensor_dropout_rate > 1.0) {
    throw InvalidArgument("inject_missingness: rates must lie in [0, 1]");
  }
  RawSensorWindow w = window;
  const auto minutes = static_cast<std::size_t>(w.duration);
  Rng rng(seed);

  // Skin conductance and temperature are not sampled during exercise.
  for (std::size_t m = 0; m < minutes; ++m) {
    if (w.labels[m] != Activity::None) {
      invalidate_minute(w, StreamGroup::Scl, m);
      invalidate_minute(w, StreamGroup::Temp, m);
    }
  }

  // Wear gaps: a binomial number of minutes, split into a few contiguous blocks.
  if (spec.wear_gap_rate > 0.0) {
    std::size_t gap_minutes = 0;
    for (std::size_t m = 0; m < minutes; ++m) gap_minutes += rng.bernoulli(spec.wear_gap_rate);
    if (gap_minutes > 0) {
      const std::size_t blocks =
          std::clamp<std::size_t>((gap_minutes + 10) / 20, 1, gap_minutes);
      // Random composition of the gap minutes into `blocks` positive lengths.
      std::vector<std::size_t> cuts;
      while (cuts.size() + 1 < blocks) {
        const std::size_t c = 1 + rng.uniform_int(gap_minutes - 1);
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
      }
      std::sort(cuts.begin(), cuts.end());
      std::vector<std::size_t> lengths;
      std::size_t prev = 0;
      for (auto c : cuts) {
        lengths.push_back(c - prev);
        prev = c;
      }
      lengths.push_back(gap_minutes - prev);
      // Free minutes scattered into blocks + 1 slots.
      const std::size_t free_minutes = minutes - gap_minutes;
      std::vector<std::size_t> marks(blocks);
      for (auto& m : marks) m = rng.uniform_int(free_minutes + 1);
      std::sort(marks.begin(), marks.end());
      std::size_t cursor = 0;
      std::size_t used_free = 0;
      for (std::size_t b = 0; b < blocks; ++b) {
        cursor += marks[b] - used_free;
        used_free = marks[b];
        for (std::size_t k = 0; k < lengths[b]; ++k, ++cursor) {
          for (auto g : {StreamGroup::Accel, StreamGroup::Ppg, StreamGroup::Scl, StreamGroup::Temp,
                         StreamGroup::Pressure}) {
            invalidate_minute(w, g, cursor);
          }
        }
      }
    }
  }

  if (spec.sensor_dropout_rate > 0.0) {
    for (auto g : {StreamGroup::Accel, StreamGroup::Ppg, StreamGroup::Scl, StreamGroup::Temp,
                   StreamGroup::Pressure}) {
      for (std::size_t m = 0; m < minutes; ++m) {
        if (rng.bernoulli(spec.sensor_dropout_rate)) invalidate_minute(w, g, m);
      }
    }
  }
  return w;
}

std::vector<std::int64_t> sample_window_starts(const SubjectParams& subject, int count,
                                               std::uint64_t seed,
                                               const PopulationOptions& options) {
  const std::int64_t span =
      static_cast<std::int64_t>(options.timeline_days) * kMinutesPerDay - kWindowMinutes;
  if (span < 0) throw InvalidArgument("timeline shorter than one window");
  Rng rng(derive_seed(subject.seed ^ seed, 17));
  std::vector<std::int64_t> starts;
  starts.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    starts.push_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(span) + 1)));
  }
  return starts;
}

std::vector<std::int64_t> sample_labeled_window_starts(const SubjectParams& subject, int count,
                                                       std::uint64_t seed,
                                                       const PopulationOptions& options) {
  const std::int64_t timeline = static_cast<std::int64_t>(options.timeline_days) * kMinutesPerDay;
  const auto win = static_cast<std::int64_t>(kWindowMinutes);
  Rng rng(derive_seed(subject.seed ^ seed, 29));
  std::vector<std::size_t> order(subject.schedule.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::int64_t> starts;
  for (std::size_t idx : order) {
    if (static_cast<int>(starts.size()) >= count) break;
    const auto& seg = subject.schedule[idx];
    const std::int64_t lo = std::max<std::int64_t>(0, seg.start_minute + seg.duration_minutes - win);
    const std::int64_t hi = std::min<std::int64_t>(seg.start_minute, timeline - win);
    if (hi < lo) continue;
    starts.push_back(lo + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo) + 1)));
  }
  return starts;
}

}  // namespace lsm::synth
