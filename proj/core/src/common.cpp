#include "lsm/common.hpp"

#include <charconv>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lsm {

namespace {

constexpr std::array<std::string_view, kNumActivities + 1> kActivityNames = {
    "Non-Exercise", "Biking",   "Elliptical", "HIIT",         "Strength-Training",
    "Swimming",     "Running",  "Walking",    "Weightlifting",
};

}  // namespace

std::string_view activity_name(Activity a) {
  const auto i = static_cast<std::size_t>(a);
  if (i >= kActivityNames.size()) throw InvalidArgument("activity code out of range");
  return kActivityNames[i];
}

Activity activity_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kActivityNames.size(); ++i) {
    if (kActivityNames[i] == name) return static_cast<Activity>(i);
  }
  if (name == "none") return Activity::None;
  throw InvalidArgument("unknown activity name: " + std::string(name));
}

Activity activity_from_index(int class_index) {
  if (class_index < 0 || class_index >= kNumActivities) {
    throw InvalidArgument("activity class index out of range: " + std::to_string(class_index));
  }
  return static_cast<Activity>(class_index + 1);
}

int activity_class_index(Activity a) {
  return a == Activity::None ? -1 : static_cast<int>(a) - 1;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("uniform_int: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << format_double(spare_);
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  int spare_flag = 0;
  std::string spare;
  is >> engine_ >> spare_flag >> spare;
  if (!is) throw SchemaError("malformed RNG state");
  has_spare_ = spare_flag != 0;
  spare_ = std::stod(spare);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  return perm;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw RuntimeFailure("format_double failed");
  return std::string(buf, ptr);
}

}  // namespace lsm
