#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/common.hpp"
#include "lsm/features.hpp"
#include "lsm/synth.hpp"

namespace lsm::frames {

/// 26 x 300 matrix, signal-major (value of signal s at minute m is at s * 300 + m).
struct SensorFrame {
  std::vector<double> values = std::vector<double>(kFrameCells, 0.0);
  std::vector<std::uint8_t> missing = std::vector<std::uint8_t>(kFrameCells, 0);
  std::string subject_id;
  std::int64_t start_minute = 0;
  std::vector<Activity> minute_labels = std::vector<Activity>(kWindowMinutes, Activity::None);
  Activity window_label = Activity::None;

  double& at(std::size_t signal, std::size_t minute) { return values[signal * kWindowMinutes + minute]; }
  double at(std::size_t signal, std::size_t minute) const {
    return values[signal * kWindowMinutes + minute];
  }
  bool is_missing(std::size_t signal, std::size_t minute) const {
    return missing[signal * kWindowMinutes + minute] != 0;
  }
};

/// Raised by fill_gaps when a signal has no valid minute in the window.
class StructurallyMissingRow : public InvalidArgument {
 public:
  explicit StructurallyMissingRow(std::size_t signal)
      : InvalidArgument("signal row " + std::to_string(signal) + " has no valid minute"),
        signal_(signal) {}
  std::size_t signal() const noexcept { return signal_; }

 private:
  std::size_t signal_;
};

class DegenerateSignal : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct NormStats {
  std::array<double, kNumSignals> mean{};
  std::array<double, kNumSignals> std{};
};

enum class SliceKind { Sample, Subject };

std::string_view slice_kind_name(SliceKind k);
SliceKind slice_kind_from_name(std::string_view name);

struct DatasetSlice {
  std::vector<std::size_t> indices;  // into the training frame list
  SliceKind kind = SliceKind::Sample;
  std::size_t size = 0;              // windows or subjects, depending on kind

  double hours() const { return 5.0 * static_cast<double>(indices.size()); }
};

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Majority non-None minute label if at least `min_fraction` of minutes carry a
/// label; otherwise None (Non-Exercise).
Activity window_label(const std::vector<Activity>& minute_labels, double min_fraction = 0.10);

SensorFrame assemble_frame(const synth::RawSensorWindow& raw,
                           const features::FeatureConfig& cfg = {});

/// Linear interpolation inside, backfill at the start, forward fill at the end.
/// Throws StructurallyMissingRow for a row without any valid minute.
SensorFrame fill_gaps(const SensorFrame& frame);

/// One row variant of fill_gaps; returns false if the row is entirely missing.
bool fill_row(std::span<double> values, std::span<const std::uint8_t> missing);

NormStats fit_norm(const std::vector<SensorFrame>& frames, const std::vector<std::size_t>& indices);
NormStats fit_norm(const std::vector<SensorFrame>& frames);

SensorFrame apply_norm(const SensorFrame& frame, const NormStats& stats);
SensorFrame invert_norm(const SensorFrame& frame, const NormStats& stats);

/// Model-ready frame: gap filled, z-scored, rows with no valid minute set to 0.
SensorFrame prepare_frame(const SensorFrame& frame, const NormStats& stats);

SplitResult split_by_subject(const std::vector<SensorFrame>& frames, double fraction,
                             std::uint64_t seed);

/// `train` indexes the frames eligible for slicing; returned indices are drawn from it.
DatasetSlice make_slice(const std::vector<SensorFrame>& frames,
                        const std::vector<std::size_t>& train, SliceKind kind, std::size_t size,
                        std::uint64_t seed);

struct CorpusOptions {
  int subjects = 10;
  int windows_per_subject = 10;
  bool labeled = false;  // windows centred on activity sessions
  synth::MissingnessSpec missingness{0.05, 0.02};
  synth::NoiseModel noise{};
  synth::PopulationOptions population{};
  std::uint64_t seed = 1;
};

/// Synthesize, inject missingness and featurize a corpus of raw frames.
std::vector<SensorFrame> generate_frames(const CorpusOptions& options,
                                         const features::FeatureConfig& cfg = {});

}  // namespace lsm::frames
