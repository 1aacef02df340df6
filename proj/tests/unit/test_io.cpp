#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "lsm/io.hpp"

using namespace lsm;
using namespace lsm::io;

namespace {

fs::path tmp(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("lsm-io-" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d / name;
}

frames::SensorFrame sample_frame(std::uint64_t seed) {
  Rng rng(seed);
  frames::SensorFrame f;
  f.subject_id = "subj-" + std::to_string(seed) + "-é";
  f.start_minute = static_cast<std::int64_t>(rng.uniform_int(100000));
  for (std::size_t i = 0; i < kFrameCells; ++i) {
    f.values[i] = rng.normal() * 50;
    f.missing[i] = rng.bernoulli(0.1);
  }
  for (std::size_t m = 0; m < kWindowMinutes; ++m) {
    f.minute_labels[m] = m < 40 ? Activity::Running : Activity::None;
  }
  f.window_label = frames::window_label(f.minute_labels);
  return f;
}

}  // namespace

TEST(Windows, RoundTripIsExactAfterQuantization) {
  std::vector<frames::SensorFrame> in;
  for (std::uint64_t s = 0; s < 3; ++s) in.push_back(quantize_f32(sample_frame(s)));
  const auto out = decode_windows(encode_windows(in));
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out[i].subject_id, in[i].subject_id);
    EXPECT_EQ(out[i].start_minute, in[i].start_minute);
    EXPECT_EQ(out[i].values, in[i].values);
    EXPECT_EQ(out[i].missing, in[i].missing);
    EXPECT_EQ(out[i].minute_labels, in[i].minute_labels);
    EXPECT_EQ(out[i].window_label, Activity::Running);
  }
}

TEST(Windows, QuantizationMatchesFloatCast) {
  const auto f = sample_frame(9);
  const auto q = quantize_f32(f);
  for (std::size_t i = 0; i < kFrameCells; ++i) {
    EXPECT_EQ(q.values[i], static_cast<double>(static_cast<float>(f.values[i])));
  }
}

TEST(Windows, LayoutIsLittleEndianWithMagic) {
  const auto bytes = encode_windows({sample_frame(1)});
  ASSERT_GE(bytes.size(), 18u);
  EXPECT_EQ(bytes.substr(0, 4), "LSMW");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 1);  // count, low byte first
  EXPECT_EQ(static_cast<unsigned char>(bytes[14]), 26);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 300 & 0xff);
  const std::size_t id_len = sample_frame(1).subject_id.size();
  EXPECT_EQ(bytes.size(), 18u + 4 + id_len + 8 + 7800 * 4 + 975 + 300);
}

TEST(Windows, BadInputsRaiseSchemaAndMissingErrors) {
  EXPECT_THROW(read_windows(tmp("absent.lsmw")), MissingInput);
  auto bytes = encode_windows({sample_frame(2)});
  EXPECT_THROW(decode_windows("XXXX" + bytes.substr(4)), SchemaError);
  EXPECT_THROW(decode_windows(bytes.substr(0, bytes.size() - 1)), SchemaError);
  EXPECT_THROW(decode_windows(bytes + "x"), SchemaError);
  auto v = bytes;
  v[4] = 9;
  EXPECT_THROW(decode_windows(v), SchemaError);
  EXPECT_THROW(decode_windows(""), SchemaError);
}

TEST(Windows, FileRoundTripAndHash) {
  const auto p = tmp("w.lsmw");
  const std::vector<frames::SensorFrame> in{quantize_f32(sample_frame(3))};
  write_windows(p, in);
  EXPECT_EQ(read_windows(p)[0].values, in[0].values);
  EXPECT_EQ(sha256_file(p), sha256_hex(encode_windows(in)));
}

TEST(Hash, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Checkpoint, RoundTripRestoresModelExactly) {
  auto cfg = model::variant("tiny");
  const model::MaeModel m(cfg, 5);
  frames::NormStats st;
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    st.mean[s] = 0.1 * s;
    st.std[s] = 1.0 + s;
  }
  optim::OptimizerState opt;
  opt.step = 42;
  for (const auto& p : m.params()) {
    opt.m.emplace_back(p.tensor.size(), 0.25);
    opt.v.emplace_back(p.tensor.size(), 0.5);
  }
  Rng rng(3);
  rng.normal();
  auto ck = make_checkpoint(m, st, opt, rng.serialize());
  ck.meta.push_back({"seed", "5"});
  const auto p = tmp("m.ckpt");
  write_checkpoint(p, ck);
  const auto back = read_checkpoint(p);
  EXPECT_EQ(back.names, ck.names);
  EXPECT_EQ(back.values, ck.values);
  EXPECT_EQ(back.optimizer.step, 42u);
  EXPECT_EQ(back.optimizer.m, opt.m);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  EXPECT_EQ(back.norm.mean, st.mean);
  EXPECT_EQ(back.norm.std, st.std);
  EXPECT_EQ(back.meta, ck.meta);
  const auto restored = restore_model(back);
  EXPECT_EQ(restored.values(), m.values());
  EXPECT_EQ(restored.num_params(), model::count_params(cfg));

  write_checkpoint(tmp("m2.ckpt"), ck);
  EXPECT_EQ(sha256_file(p), sha256_file(tmp("m2.ckpt")));
}

TEST(Checkpoint, MismatchedNamesAreRejected) {
  const model::MaeModel m(model::variant("tiny"), 1);
  auto ck = make_checkpoint(m, {});
  ck.names[0] = "bogus";
  EXPECT_THROW(restore_model(ck), SchemaError);
  EXPECT_THROW(read_checkpoint(tmp("nope.ckpt")), MissingInput);
  std::ofstream(tmp("junk.ckpt")) << "not a checkpoint";
  EXPECT_THROW(read_checkpoint(tmp("junk.ckpt")), SchemaError);
}

TEST(Config, ModelConfigTextRoundTrip) {
  auto c = model::variant("small");
  c.patch_time = 20;
  const auto back = config_from_text(config_to_text(c));
  EXPECT_EQ(back.variant, "small");
  EXPECT_EQ(back.patch_time, 20u);
  EXPECT_EQ(back.enc_dim, c.enc_dim);
  EXPECT_EQ(model::count_params(back), model::count_params(c));
}

TEST(Norm, FileRoundTripIsExact) {
  frames::NormStats st;
  Rng rng(4);
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    st.mean[s] = rng.normal() * 100;
    st.std[s] = rng.uniform(0.001, 10);
  }
  write_norm(tmp("n.txt"), st);
  const auto back = read_norm(tmp("n.txt"));
  EXPECT_EQ(back.mean, st.mean);
  EXPECT_EQ(back.std, st.std);
}

TEST(Manifest, EntriesAppendAndLastValueWins) {
  const Entries e{{"a", "1"}, {"b", "x=y"}};
  EXPECT_EQ(parse_entries(format_entries(e)), e);
  const auto p = tmp("run.manifest");
  fs::remove(p);
  append_manifest(p, e);
  append_manifest(p, {{"a", "2"}});
  const auto all = read_manifest(p);
  EXPECT_EQ(all.size(), 3u);
  EXPECT_EQ(manifest_value(all, "a"), "2");
  EXPECT_EQ(manifest_value(all, "b"), "x=y");
  EXPECT_EQ(manifest_value(all, "zzz"), "");
  EXPECT_THROW(format_entries({{"bad=key", "v"}}), InvalidArgument);
}

TEST(Manifest, AtomicWriteReplacesContent) {
  const auto p = tmp("atomic.txt");
  atomic_write(p, "first");
  atomic_write(p, "second");
  EXPECT_EQ(read_file(p), "second");
  for (const auto& entry : fs::directory_iterator(p.parent_path())) {
    EXPECT_EQ(entry.path().filename().string().find(".tmp"), std::string::npos) << entry.path();
  }
}

TEST(Csv, RoundTripAndRejectsCellsNeedingQuotes) {
  Table t;
  t.header = {"name", "value"};
  t.rows = {{"plain", "1"}, {"dash-and_under", "2.5e-3"}};
  const auto back = parse_csv(format_csv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("value"), 1u);
  EXPECT_THROW(back.column("nope"), SchemaError);
  t.rows.push_back({"has,comma", "3"});
  EXPECT_THROW(format_csv(t), InvalidArgument);
  t.rows.back() = {"has\"quote", "3"};
  EXPECT_THROW(format_csv(t), InvalidArgument);
}

TEST(Csv, EmptyOrRaggedFilesAreSchemaErrors) {
  std::ofstream(tmp("empty.csv")).flush();
  EXPECT_THROW(read_csv(tmp("empty.csv")), SchemaError);
  std::ofstream(tmp("ragged.csv")) << "a,b\n1,2,3\n";
  EXPECT_THROW(read_csv(tmp("ragged.csv")), SchemaError);
  EXPECT_THROW(read_csv(tmp("absent.csv")), MissingInput);
}
