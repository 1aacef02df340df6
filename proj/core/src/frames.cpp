#include "lsm/frames.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace lsm::frames {

Activity window_label(const std::vector<Activity>& minute_labels, double min_fraction) {
  std::array<std::size_t, kNumActivities + 1> counts{};
  std::size_t labeled = 0;
  for (Activity a : minute_labels) {
    if (a == Activity::None) continue;
    ++counts[static_cast<std::size_t>(a)];
    ++labeled;
  }
  if (minute_labels.empty() ||
      static_cast<double>(labeled) < min_fraction * static_cast<double>(minute_labels.size())) {
    return Activity::None;
  }
  std::size_t best = 1;
  for (std::size_t c = 2; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<Activity>(best);
}

SensorFrame assemble_frame(const synth::RawSensorWindow& raw, const features::FeatureConfig& cfg) {
  if (raw.duration != static_cast<int>(kWindowMinutes)) {
    throw InvalidArgument("frames are built from 300-minute windows");
  }
  const auto rows = features::featurize_window(raw, cfg);
  SensorFrame f;
  f.subject_id = raw.subject_id;
  f.start_minute = raw.start_minute;
  f.minute_labels = raw.labels;
  f.window_label = window_label(raw.labels);
  for (std::size_t m = 0; m < kWindowMinutes; ++m) {
    for (std::size_t s = 0; s < kNumSignals; ++s) {
      const std::size_t i = s * kWindowMinutes + m;
      f.missing[i] = rows[m].missing[s] ? 1 : 0;
      f.values[i] = rows[m].missing[s] ? 0.0 : rows[m].values[s];
    }
  }
  return f;
}

bool fill_row(std::span<double> values, std::span<const std::uint8_t> missing) {
  const std::size_t n = values.size();
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!missing[i]) {
      first = i;
      break;
    }
  }
  if (first == n) return false;
  for (std::size_t i = 0; i < first; ++i) values[i] = values[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (missing[i]) continue;
    if (i > prev + 1) {
      const double a = values[prev], b = values[i];
      const double span = static_cast<double>(i - prev);
      for (std::size_t k = prev + 1; k < i; ++k) {
        values[k] = a + (b - a) * static_cast<double>(k - prev) / span;
      }
    }
    prev = i;
  }
  for (std::size_t i = prev + 1; i < n; ++i) values[i] = values[prev];
  return true;
}

SensorFrame fill_gaps(const SensorFrame& frame) {
  SensorFrame out = frame;
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    auto row = std::span<double>(out.values).subspan(s * kWindowMinutes, kWindowMinutes);
    auto miss = std::span<const std::uint8_t>(out.missing).subspan(s * kWindowMinutes, kWindowMinutes);
    if (!fill_row(row, miss)) throw StructurallyMissingRow(s);
  }
  return out;
}

NormStats fit_norm(const std::vector<SensorFrame>& frames, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw InvalidArgument("fit_norm: no frames");
  NormStats st;
  std::array<double, kNumSignals> sum{}, count{};
  for (std::size_t idx : indices) {
    const auto& f = frames.at(idx);
    for (std::size_t i = 0; i < kFrameCells; ++i) {
      if (f.missing[i]) continue;
      sum[i / kWindowMinutes] += f.values[i];
      count[i / kWindowMinutes] += 1.0;
    }
  }
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    if (count[s] == 0.0) {
      throw DegenerateSignal("signal " + std::string(features::signal_names()[s]) +
                             " has no valid cells in the training split");
    }
    st.mean[s] = sum[s] / count[s];
  }
  std::array<double, kNumSignals> ss{};
  for (std::size_t idx : indices) {
    const auto& f = frames[idx];
    for (std::size_t i = 0; i < kFrameCells; ++i) {
      if (f.missing[i]) continue;
      const double d = f.values[i] - st.mean[i / kWindowMinutes];
      ss[i / kWindowMinutes] += d * d;
    }
  }
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    st.std[s] = std::sqrt(ss[s] / count[s]);
    if (st.std[s] < 1e-8) {
      throw DegenerateSignal("signal " + std::string(features::signal_names()[s]) +
                             " has zero variance in the training split");
    }
  }
  return st;
}

NormStats fit_norm(const std::vector<SensorFrame>& frames) {
  std::vector<std::size_t> all(frames.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return fit_norm(frames, all);
}

SensorFrame apply_norm(const SensorFrame& frame, const NormStats& stats) {
  SensorFrame out = frame;
  for (std::size_t i = 0; i < kFrameCells; ++i) {
    const std::size_t s = i / kWindowMinutes;
    out.values[i] = (frame.values[i] - stats.mean[s]) / stats.std[s];
  }
  return out;
}

SensorFrame invert_norm(const SensorFrame& frame, const NormStats& stats) {
  SensorFrame out = frame;
  for (std::size_t i = 0; i < kFrameCells; ++i) {
    const std::size_t s = i / kWindowMinutes;
    out.values[i] = frame.values[i] * stats.std[s] + stats.mean[s];
  }
  return out;
}

SensorFrame prepare_frame(const SensorFrame& frame, const NormStats& stats) {
  SensorFrame out = frame;
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    auto row = std::span<double>(out.values).subspan(s * kWindowMinutes, kWindowMinutes);
    auto miss = std::span<const std::uint8_t>(out.missing).subspan(s * kWindowMinutes, kWindowMinutes);
    if (fill_row(row, miss)) {
      for (double& v : row) v = (v - stats.mean[s]) / stats.std[s];
    } else {
      std::fill(row.begin(), row.end(), 0.0);
    }
  }
  return out;
}

SplitResult split_by_subject(const std::vector<SensorFrame>& frames, double fraction,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must be in (0, 1)");
  std::vector<std::string> subjects;
  {
    std::set<std::string> seen;
    for (const auto& f : frames) {
      if (seen.insert(f.subject_id).second) subjects.push_back(f.subject_id);
    }
  }
  if (subjects.size() < 2) throw InvalidArgument("split_by_subject needs at least 2 subjects");
  std::sort(subjects.begin(), subjects.end());
  const auto perm = seeded_permutation(subjects.size(), seed);
  auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(subjects.size()) + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, subjects.size() - 1);
  std::set<std::string> train_subjects;
  for (std::size_t i = 0; i < n_train; ++i) train_subjects.insert(subjects[perm[i]]);
  SplitResult r;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    (train_subjects.count(frames[i].subject_id) ? r.train : r.test).push_back(i);
  }
  return r;
}

std::string_view slice_kind_name(SliceKind k) { return k == SliceKind::Sample ? "sample" : "subject"; }

SliceKind slice_kind_from_name(std::string_view name) {
  if (name == "sample") return SliceKind::Sample;
  if (name == "subject") return SliceKind::Subject;
  throw InvalidArgument("unknown slice kind: " + std::string(name));
}

DatasetSlice make_slice(const std::vector<SensorFrame>& frames,
                        const std::vector<std::size_t>& train, SliceKind kind, std::size_t size,
                        std::uint64_t seed) {
  DatasetSlice slice;
  slice.kind = kind;
  slice.size = size;
  if (kind == SliceKind::Sample) {
    if (size > train.size()) throw InvalidArgument("sample slice larger than the training split");
    const auto perm = seeded_permutation(train.size(), seed);
    for (std::size_t i = 0; i < size; ++i) slice.indices.push_back(train[perm[i]]);
    return slice;
  }
  std::vector<std::string> subjects;
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t idx : train) {
    auto& v = by_subject[frames.at(idx).subject_id];
    if (v.empty()) subjects.push_back(frames[idx].subject_id);
    v.push_back(idx);
  }
  if (size > subjects.size()) throw InvalidArgument("subject slice larger than the training split");
  std::sort(subjects.begin(), subjects.end());
  const auto perm = seeded_permutation(subjects.size(), seed);
  for (std::size_t i = 0; i < size; ++i) {
    const auto& v = by_subject[subjects[perm[i]]];
    slice.indices.insert(slice.indices.end(), v.begin(), v.end());
  }
  return slice;
}

std::vector<SensorFrame> generate_frames(const CorpusOptions& options,
                                         const features::FeatureConfig& cfg) {
  const auto population = synth::gen_population(options.subjects, options.seed, options.population);
  std::vector<SensorFrame> out;
  for (std::size_t si = 0; si < population.size(); ++si) {
    const auto& subject = population[si];
    const std::uint64_t window_seed = derive_seed(options.seed, 1000 + si);
    const auto starts =
        options.labeled
            ? synth::sample_labeled_window_starts(subject, options.windows_per_subject, window_seed,
                                                  options.population)
            : synth::sample_window_starts(subject, options.windows_per_subject, window_seed,
                                          options.population);
    for (std::size_t wi = 0; wi < starts.size(); ++wi) {
      const auto raw = synth::gen_raw_window(subject, starts[wi], static_cast<int>(kWindowMinutes),
                                             options.noise);
      const auto holey = synth::inject_missingness(
          raw, options.missingness, derive_seed(window_seed, 7919 + wi));
      out.push_back(assemble_frame(holey, cfg));
    }
  }
  return out;
}

}  // namespace lsm::frames
