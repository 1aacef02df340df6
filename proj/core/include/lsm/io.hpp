#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lsm/frames.hpp"
#include "lsm/model.hpp"
#include "lsm/optim.hpp"

namespace lsm::io {

namespace fs = std::filesystem;

inline constexpr std::uint16_t kWindowFileVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

// --- Window files -----------------------------------------------------------
//
// "LSMW" | version u16 | count u64 | features u16 | minutes u16, then per record:
// id length u32 + UTF-8 bytes | start_minute i64 | 26 x 300 f32 row-major |
// missing bitset (7800 bits, LSB first) | 300 label bytes. Everything is
// little-endian. Values round-trip exactly when they are f32-representable; the
// window label is recomputed from the minute labels on read.

/// Rounds every value to the nearest f32, as a write/read cycle would.
frames::SensorFrame quantize_f32(const frames::SensorFrame& frame);

std::string encode_windows(const std::vector<frames::SensorFrame>& frames);
std::vector<frames::SensorFrame> decode_windows(const std::string& bytes);

void write_windows(const fs::path& path, const std::vector<frames::SensorFrame>& frames);
/// Throws MissingInput when absent and SchemaError on bad magic, version or size.
std::vector<frames::SensorFrame> read_windows(const fs::path& path);

// --- Checkpoints ------------------------------------------------------------

struct Checkpoint {
  model::ModelConfig config;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  optim::OptimizerState optimizer;
  std::string rng_state;
  frames::NormStats norm;
  std::vector<std::pair<std::string, std::string>> meta;
};

Checkpoint make_checkpoint(const model::MaeModel& m, const frames::NormStats& norm,
                           const optim::OptimizerState& opt = {}, std::string rng_state = {});
/// Rebuilds a model from a checkpoint; parameter names must match the architecture.
model::MaeModel restore_model(const Checkpoint& ckpt);

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const fs::path& path);

std::string config_to_text(const model::ModelConfig& cfg);
model::ModelConfig config_from_text(const std::string& text);

// --- Normalization statistics -----------------------------------------------

void write_norm(const fs::path& path, const frames::NormStats& stats);
frames::NormStats read_norm(const fs::path& path);

// --- Key=value manifests ----------------------------------------------------

using Entries = std::vector<std::pair<std::string, std::string>>;

/// One "key=value" line per entry. Keys may not contain '=' or newlines.
std::string format_entries(const Entries& entries);
Entries parse_entries(const std::string& text);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const fs::path& path, const std::string& bytes);

/// Adds entries after any existing content; earlier lines are never rewritten.
void append_manifest(const fs::path& path, const Entries& entries);
Entries read_manifest(const fs::path& path);
/// Last value recorded for `key`, or empty.
std::string manifest_value(const Entries& entries, const std::string& key);

// --- CSV --------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws SchemaError if absent
};

std::string format_csv(const Table& t);
Table parse_csv(const std::string& text);
void write_csv(const fs::path& path, const Table& t);
/// Throws SchemaError when the file is empty or rows are ragged.
Table read_csv(const fs::path& path);

// --- Files and hashing ------------------------------------------------------

std::string read_file(const fs::path& path);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

}  // namespace lsm::io
