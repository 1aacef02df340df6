#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lsm {

inline constexpr std::size_t kNumSignals = 26;
inline constexpr std::size_t kWindowMinutes = 300;
inline constexpr std::size_t kFrameCells = kNumSignals * kWindowMinutes;

// Error taxonomy. The CLI maps these onto distinct exit codes.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const std::string& path)
      : std::runtime_error("missing input file: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class TrainingDiverged : public RuntimeFailure {
 public:
  TrainingDiverged(const std::string& what, std::size_t step)
      : RuntimeFailure(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Activity classes of the downstream set. None doubles as "Non-Exercise" when
// used as a window label.
enum class Activity : std::uint8_t {
  None = 0,
  Biking = 1,
  Elliptical = 2,
  Hiit = 3,
  StrengthTraining = 4,
  Swimming = 5,
  Running = 6,
  Walking = 7,
  Weightlifting = 8,
};

inline constexpr int kNumActivities = 8;

std::string_view activity_name(Activity a);
Activity activity_from_name(std::string_view name);
Activity activity_from_index(int class_index);  // 0-based over the 8 classes
int activity_class_index(Activity a);            // -1 for None

/// splitmix64 finalizer; derives independent stream seeds from (seed, tag).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Deterministic RNG with portable distributions. The std:: distributions are
/// implementation-defined, so golden outputs would differ across standard
/// libraries if they were used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Permutation of 0..n-1 under a seeded Fisher-Yates shuffle.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace lsm
