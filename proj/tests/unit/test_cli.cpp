#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"
#include "lsm/io.hpp"

using namespace lsm;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("lsm-cli-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "small.cfg") << "pretrain.batch=2\npretrain.warmup=1\nfinetune.steps=2\nfinetune.batch=2\n"
                                        "probe.steps=2\nprobe.batch=2\nfewshot.ks=1\nfewshot.seeds=1\n"
                                        "sweep.slice_sizes=2,4\nsweep.step_budgets=1\nsweep.test_frames=2\n";
    ASSERT_EQ(call({"synth", "--subjects", "4", "--windows", "3", "--seed", "1", "--out", p("a.lsmw")}), 0);
    ASSERT_EQ(call({"featurize", "--in", p("a.lsmw"), "--seed", "2", "--out", p("feat")}), 0) << last_err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string p(const std::string& name) { return (dir / name).string(); }

  static inline std::string last_out, last_err;
  static int call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int rc = cli::run(args, out, err);
    last_out = out.str();
    last_err = err.str();
    return rc;
  }
};

fs::path Cli::dir;

}  // namespace

TEST_F(Cli, SynthIsByteIdenticalForASeed) {
  ASSERT_EQ(call({"synth", "--subjects", "4", "--windows", "3", "--seed", "1", "--out", p("b.lsmw")}), 0);
  EXPECT_EQ(io::sha256_file(p("a.lsmw")), io::sha256_file(p("b.lsmw")));
  ASSERT_EQ(call({"synth", "--subjects", "4", "--windows", "3", "--seed", "9", "--out", p("c.lsmw")}), 0);
  EXPECT_NE(io::sha256_file(p("a.lsmw")), io::sha256_file(p("c.lsmw")));
  EXPECT_EQ(io::read_windows(p("a.lsmw")).size(), 12u);
  EXPECT_TRUE(fs::exists(p("a.lsmw") + ".manifest"));
}

TEST_F(Cli, FeaturizeWritesSplitAndNorm) {
  for (const char* f : {"train.lsmw", "test.lsmw", "norm.txt"}) EXPECT_TRUE(fs::exists(dir / "feat" / f)) << f;
  const auto train = io::read_windows(dir / "feat" / "train.lsmw");
  const auto test = io::read_windows(dir / "feat" / "test.lsmw");
  EXPECT_EQ(train.size() + test.size(), 12u);
  for (const auto& f : train) {
    for (double v : f.values) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST_F(Cli, FeaturizeCanReuseNormalization) {
  ASSERT_EQ(call({"synth", "--subjects", "4", "--windows", "3", "--seed", "5", "--out", p("other.lsmw")}), 0);
  ASSERT_EQ(call({"featurize", "--in", p("other.lsmw"), "--seed", "2", "--out", p("reused"), "--norm",
                  p("feat/norm.txt")}),
            0)
      << last_err;
  EXPECT_EQ(io::read_file(dir / "reused" / "norm.txt"), io::read_file(dir / "feat" / "norm.txt"));
  const auto raw = io::read_windows(p("other.lsmw"));
  const auto st = io::read_norm(p("feat/norm.txt"));
  const auto train = io::read_windows(dir / "reused" / "train.lsmw");
  const auto& f = train.front();
  const auto it = std::find_if(raw.begin(), raw.end(), [&](const auto& r) {
    return r.subject_id == f.subject_id && r.start_minute == f.start_minute;
  });
  ASSERT_NE(it, raw.end());
  for (std::size_t c = 0; c < kFrameCells; ++c) {
    if (it->missing[c]) continue;
    const std::size_t s = c / kWindowMinutes;
    EXPECT_NEAR(f.values[c], (it->values[c] - st.mean[s]) / st.std[s], 1e-5);
  }
  EXPECT_EQ(call({"featurize", "--in", p("other.lsmw"), "--seed", "2", "--out", p("r2"), "--norm", p("none.txt")}), 2);
}

TEST_F(Cli, PretrainTwiceGivesIdenticalCheckpoints) {
  for (const char* out : {"m1.ckpt", "m2.ckpt"}) {
    ASSERT_EQ(call({"pretrain", "--config", p("small.cfg"), "--train", p("feat/train.lsmw"), "--norm",
                    p("feat/norm.txt"), "--steps", "2", "--seed", "3", "--out", p(out)}),
              0)
        << last_err;
  }
  EXPECT_EQ(io::sha256_file(p("m1.ckpt")), io::sha256_file(p("m2.ckpt")));
  EXPECT_EQ(io::sha256_file(p("m1.ckpt.curve.csv")), io::sha256_file(p("m2.ckpt.curve.csv")));
  const auto ck = io::read_checkpoint(p("m1.ckpt"));
  EXPECT_EQ(io::manifest_value(ck.meta, "steps"), "2");
}

TEST_F(Cli, EvalGenWritesOneRowPerTask) {
  ASSERT_EQ(call({"eval-gen", "--test", p("feat/test.lsmw"), "--method", "linear", "--task", "interpolation",
                  "--duration", "60", "--seed", "4", "--out", p("gen.csv")}),
            0)
      << last_err;
  const auto t = io::read_csv(p("gen.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"task", "duration", "method", "mae", "mse", "n"}));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], "interpolation");
  EXPECT_EQ(t.rows[0][1], "60");
  EXPECT_EQ(t.rows[0][2], "linear");
  ASSERT_EQ(call({"eval-gen", "--test", p("feat/test.lsmw"), "--method", "linear", "--task", "interpolation",
                  "--duration", "60", "--seed", "4", "--out", p("gen2.csv")}),
            0);
  EXPECT_EQ(io::read_file(p("gen.csv")), io::read_file(p("gen2.csv")));
}

TEST_F(Cli, FitPowerlawWritesParameters) {
  std::ofstream csv(p("runs.csv"));
  csv << "flops,loss\n";
  for (int e = 3; e <= 9; ++e) csv << "1e" << e << "," << format_double(2.0 * std::pow(10.0, -0.3 * e) + 0.1) << "\n";
  csv.close();
  ASSERT_EQ(call({"fit-powerlaw", "--in", p("runs.csv"), "--out", p("fit.txt")}), 0) << last_err;
  const auto e = io::parse_entries(io::read_file(p("fit.txt")));
  EXPECT_NEAR(std::stod(io::manifest_value(e, "b")), -0.3, 1e-6);
  EXPECT_NEAR(std::stod(io::manifest_value(e, "a")), 2.0, 1e-6);
  EXPECT_EQ(io::manifest_value(e, "points"), "7");
}

TEST_F(Cli, ExportPlotIsDeterministic) {
  std::ofstream(p("sc.csv")) << "variant,flops,loss\ntiny,1e9,0.9\ntiny,2e9,0.8\nsmall,4e9,0.7\n";
  ASSERT_EQ(call({"export-plot", "--in", p("sc.csv"), "--kind", "scaling", "--out", p("a.svg")}), 0) << last_err;
  ASSERT_EQ(call({"export-plot", "--in", p("sc.csv"), "--kind", "scaling", "--out", p("b.svg")}), 0);
  EXPECT_EQ(io::read_file(p("a.svg")), io::read_file(p("b.svg")));
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  EXPECT_EQ(call({"eval-gen", "--test", p("nope.lsmw"), "--method", "linear", "--seed", "1", "--out", p("x.csv")}),
            cli::kMissingInput);
  EXPECT_NE(last_err.find("nope.lsmw"), std::string::npos);
  std::ofstream(p("bad.lsmw")) << "garbage";
  EXPECT_EQ(call({"eval-gen", "--test", p("bad.lsmw"), "--method", "linear", "--seed", "1", "--out", p("x.csv")}),
            cli::kSchema);
  std::ofstream(p("empty.csv")).flush();
  EXPECT_EQ(call({"export-plot", "--in", p("empty.csv"), "--kind", "pareto", "--out", p("e.svg")}), cli::kSchema);
  EXPECT_EQ(call({"eval-gen", "--test", p("feat/test.lsmw"), "--method", "kalman", "--seed", "1", "--out",
                  p("x.csv")}),
            cli::kInvalidArgument);
  EXPECT_EQ(call({"synth", "--out", p("z.lsmw")}), cli::kInvalidArgument);  // seed is required
  EXPECT_EQ(call({"teleport"}), cli::kInvalidArgument);
  std::ofstream(p("unknown.cfg")) << "model.colour=blue\n";
  EXPECT_EQ(call({"synth", "--config", p("unknown.cfg"), "--seed", "1", "--out", p("z.lsmw")}), cli::kSchema);
}
