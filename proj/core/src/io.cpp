#include "lsm/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lsm::io {

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void bytes(const std::string& s) { buf_.append(s); }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(get<std::uint32_t>()); }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw SchemaError("file truncated at byte " + std::to_string(pos_));
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

constexpr char kWindowMagic[4] = {'L', 'S', 'M', 'W'};
constexpr char kCheckpointMagic[4] = {'L', 'S', 'M', 'C'};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
  if (r.bytes(4) != std::string(magic, 4)) throw SchemaError(std::string("not a ") + what + " (bad magic)");
}

}  // namespace

// --- Window files -----------------------------------------------------------

frames::SensorFrame quantize_f32(const frames::SensorFrame& frame) {
  auto out = frame;
  for (auto& v : out.values) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::string encode_windows(const std::vector<frames::SensorFrame>& frames) {
  Writer w;
  w.bytes(std::string(kWindowMagic, 4));
  w.put<std::uint16_t>(kWindowFileVersion);
  w.put<std::uint64_t>(frames.size());
  w.put<std::uint16_t>(static_cast<std::uint16_t>(kNumSignals));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(kWindowMinutes));
  for (const auto& f : frames) {
    if (f.values.size() != kFrameCells || f.missing.size() != kFrameCells ||
        f.minute_labels.size() != kWindowMinutes) {
      throw InvalidArgument("encode_windows: frame " + f.subject_id + " has the wrong shape");
    }
    w.str(f.subject_id);
    w.put<std::int64_t>(f.start_minute);
    for (double v : f.values) w.put<float>(static_cast<float>(v));
    std::string bits((kFrameCells + 7) / 8, '\0');
    for (std::size_t i = 0; i < kFrameCells; ++i) {
      if (f.missing[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
    }
    w.bytes(bits);
    for (auto a : f.minute_labels) w.put<std::uint8_t>(static_cast<std::uint8_t>(a));
  }
  return w.take();
}

std::vector<frames::SensorFrame> decode_windows(const std::string& bytes) {
  Reader r(bytes);
  check_magic(r, kWindowMagic, "window file");
  const auto version = r.get<std::uint16_t>();
  if (version != kWindowFileVersion) throw SchemaError("unsupported window file version " + std::to_string(version));
  const auto count = r.get<std::uint64_t>();
  const auto nfeat = r.get<std::uint16_t>();
  const auto nmin = r.get<std::uint16_t>();
  if (nfeat != kNumSignals || nmin != kWindowMinutes) {
    throw SchemaError("window file shape " + std::to_string(nfeat) + " x " + std::to_string(nmin) +
                      " is not 26 x 300");
  }
  const std::size_t fixed = 8 + kFrameCells * 4 + (kFrameCells + 7) / 8 + kWindowMinutes;
  if (count > r.remaining() / (fixed + 4)) throw SchemaError("window file record count exceeds file size");
  std::vector<frames::SensorFrame> out(count);
  for (auto& f : out) {
    f.subject_id = r.str();
    f.start_minute = r.get<std::int64_t>();
    for (auto& v : f.values) v = static_cast<double>(r.get<float>());
    const auto bits = r.bytes((kFrameCells + 7) / 8);
    for (std::size_t i = 0; i < kFrameCells; ++i) {
      f.missing[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1;
    }
    for (auto& a : f.minute_labels) {
      const auto b = r.get<std::uint8_t>();
      if (b > static_cast<std::uint8_t>(Activity::Weightlifting)) {
        throw SchemaError("label byte " + std::to_string(b) + " out of range");
      }
      a = static_cast<Activity>(b);
    }
    f.window_label = frames::window_label(f.minute_labels);
  }
  if (!r.done()) throw SchemaError("trailing bytes after the last window record");
  return out;
}

void write_windows(const fs::path& path, const std::vector<frames::SensorFrame>& frames) {
  atomic_write(path, encode_windows(frames));
}

std::vector<frames::SensorFrame> read_windows(const fs::path& path) { return decode_windows(read_file(path)); }

// --- Checkpoints ------------------------------------------------------------

std::string config_to_text(const model::ModelConfig& c) {
  return format_entries({{"variant", c.variant},
                         {"enc_blocks", std::to_string(c.enc_blocks)},
                         {"dec_blocks", std::to_string(c.dec_blocks)},
                         {"enc_dim", std::to_string(c.enc_dim)},
                         {"dec_dim", std::to_string(c.dec_dim)},
                         {"enc_heads", std::to_string(c.enc_heads)},
                         {"dec_heads", std::to_string(c.dec_heads)},
                         {"patch_time", std::to_string(c.patch_time)},
                         {"patch_signals", std::to_string(c.patch_signals)},
                         {"mlp_ratio", std::to_string(c.mlp_ratio)}});
}

model::ModelConfig config_from_text(const std::string& text) {
  model::ModelConfig c;
  for (const auto& [k, v] : parse_entries(text)) {
    auto num = [&] {
      try {
        return static_cast<std::size_t>(std::stoull(v));
      } catch (const std::exception&) {
        throw SchemaError("model config value for " + k + " is not an integer: " + v);
      }
    };
    if (k == "variant") c.variant = v;
    else if (k == "enc_blocks") c.enc_blocks = num();
    else if (k == "dec_blocks") c.dec_blocks = num();
    else if (k == "enc_dim") c.enc_dim = num();
    else if (k == "dec_dim") c.dec_dim = num();
    else if (k == "enc_heads") c.enc_heads = num();
    else if (k == "dec_heads") c.dec_heads = num();
    else if (k == "patch_time") c.patch_time = num();
    else if (k == "patch_signals") c.patch_signals = num();
    else if (k == "mlp_ratio") c.mlp_ratio = num();
    else throw SchemaError("unknown model config key: " + k);
  }
  return c;
}

Checkpoint make_checkpoint(const model::MaeModel& m, const frames::NormStats& norm,
                           const optim::OptimizerState& opt, std::string rng_state) {
  Checkpoint c;
  c.config = m.config();
  for (const auto& p : m.params()) c.names.push_back(p.name);
  c.values = m.values();
  c.optimizer = opt;
  c.rng_state = std::move(rng_state);
  c.norm = norm;
  return c;
}

model::MaeModel restore_model(const Checkpoint& ckpt) {
  model::MaeModel m(ckpt.config, 0);
  const auto& params = m.params();
  if (params.size() != ckpt.names.size()) throw SchemaError("checkpoint parameter count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != ckpt.names[i]) {
      throw SchemaError("checkpoint parameter " + ckpt.names[i] + " where " + params[i].name + " was expected");
    }
  }
  m.load_values(ckpt.values);
  return m;
}

void write_checkpoint(const fs::path& path, const Checkpoint& c) {
  if (c.names.size() != c.values.size()) throw InvalidArgument("checkpoint names and values differ in length");
  Writer w;
  w.bytes(std::string(kCheckpointMagic, 4));
  w.put<std::uint16_t>(kCheckpointVersion);
  w.str(config_to_text(c.config));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    w.str(k);
    w.str(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.names.size()));
  for (std::size_t i = 0; i < c.names.size(); ++i) {
    w.str(c.names[i]);
    w.put<std::uint64_t>(c.values[i].size());
    for (double v : c.values[i]) w.put<double>(v);
  }
  w.put<std::uint64_t>(c.optimizer.step);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.optimizer.m.size()));
  for (std::size_t i = 0; i < c.optimizer.m.size(); ++i) {
    w.put<std::uint64_t>(c.optimizer.m[i].size());
    for (double v : c.optimizer.m[i]) w.put<double>(v);
    for (double v : c.optimizer.v[i]) w.put<double>(v);
  }
  w.str(c.rng_state);
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    w.put<double>(c.norm.mean[s]);
    w.put<double>(c.norm.std[s]);
  }
  atomic_write(path, w.take());
}

Checkpoint read_checkpoint(const fs::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes);
  check_magic(r, kCheckpointMagic, "checkpoint");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config = config_from_text(r.str());
  const auto nmeta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    auto k = r.str();
    c.meta.emplace_back(std::move(k), r.str());
  }
  const auto nparams = r.get<std::uint32_t>();
  auto read_vec = [&](std::uint64_t n) {
    if (n > r.remaining() / 8) throw SchemaError("checkpoint tensor exceeds file size");
    std::vector<double> v(n);
    for (auto& x : v) x = r.get<double>();
    return v;
  };
  for (std::uint32_t i = 0; i < nparams; ++i) {
    c.names.push_back(r.str());
    c.values.push_back(read_vec(r.get<std::uint64_t>()));
  }
  c.optimizer.step = r.get<std::uint64_t>();
  const auto nstate = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nstate; ++i) {
    const auto n = r.get<std::uint64_t>();
    c.optimizer.m.push_back(read_vec(n));
    c.optimizer.v.push_back(read_vec(n));
  }
  c.rng_state = r.str();
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    c.norm.mean[s] = r.get<double>();
    c.norm.std[s] = r.get<double>();
  }
  if (!r.done()) throw SchemaError("trailing bytes after checkpoint");
  return c;
}

// --- Normalization statistics -----------------------------------------------

void write_norm(const fs::path& path, const frames::NormStats& stats) {
  Entries e;
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    e.emplace_back("mean." + std::to_string(s), format_double(stats.mean[s]));
    e.emplace_back("std." + std::to_string(s), format_double(stats.std[s]));
  }
  atomic_write(path, format_entries(e));
}

frames::NormStats read_norm(const fs::path& path) {
  frames::NormStats stats;
  std::vector<int> seen(2 * kNumSignals, 0);
  for (const auto& [k, v] : parse_entries(read_file(path))) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) throw SchemaError("bad normalization key: " + k);
    const auto field = k.substr(0, dot);
    std::size_t s = 0;
    double x = 0.0;
    try {
      s = std::stoul(k.substr(dot + 1));
      x = std::stod(v);
    } catch (const std::exception&) {
      throw SchemaError("bad normalization entry: " + k + "=" + v);
    }
    if (s >= kNumSignals || (field != "mean" && field != "std")) throw SchemaError("bad normalization key: " + k);
    (field == "mean" ? stats.mean : stats.std)[s] = x;
    seen[(field == "mean" ? 0 : kNumSignals) + s] = 1;
  }
  for (int f : seen) {
    if (!f) throw SchemaError("normalization file " + path.string() + " is incomplete");
  }
  return stats;
}

// --- Manifests --------------------------------------------------------------

std::string format_entries(const Entries& entries) {
  std::string out;
  for (const auto& [k, v] : entries) {
    if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw InvalidArgument("entry cannot be written as key=value: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

Entries parse_entries(const std::string& text) {
  Entries out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("line " + std::to_string(lineno) + " is not key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t") - b + 1);
    };
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw SchemaError("line " + std::to_string(lineno) + " has an empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw RuntimeFailure("cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw RuntimeFailure("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

void append_manifest(const fs::path& path, const Entries& entries) {
  std::string existing = fs::exists(path) ? read_file(path) : std::string();
  atomic_write(path, existing + format_entries(entries));
}

Entries read_manifest(const fs::path& path) { return parse_entries(read_file(path)); }

std::string manifest_value(const Entries& entries, const std::string& key) {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->first == key) return it->second;
  }
  return {};
}

// --- CSV --------------------------------------------------------------------

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw SchemaError("CSV has no column " + name);
}

std::string format_csv(const Table& t) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\n\"") != std::string::npos) {
        throw InvalidArgument("CSV cell needs quoting: " + cells[i]);
      }
      if (i) s += ',';
      s += cells[i];
    }
    return s + "\n";
  };
  std::string out = line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw InvalidArgument("CSV row width differs from header");
    out += line(r);
  }
  return out;
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      cells.push_back(s.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      t.header = split(line);
      have_header = true;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw SchemaError("CSV row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw SchemaError("CSV is empty");
  return t;
}

void write_csv(const fs::path& path, const Table& t) { atomic_write(path, format_csv(t)); }

Table read_csv(const fs::path& path) { return parse_csv(read_file(path)); }

// --- Files and hashing ------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInput(path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw RuntimeFailure("SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

}  // namespace lsm::io
