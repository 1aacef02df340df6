#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "lsm/config.hpp"
#include "lsm/eval.hpp"
#include "lsm/io.hpp"
#include "lsm/plot.hpp"
#include "lsm/scaling.hpp"

#ifndef LSM_VERSION
#define LSM_VERSION "0.0.0"
#endif

namespace lsm::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool stochastic, bool needs_out = true) {
  sub->add_option("--config", c.config, "key=value run configuration (defaults when omitted)");
  if (stochastic) sub->add_option("--seed", c.seed, "random seed")->required();
  if (needs_out) sub->add_option("--out", c.out, "output path")->required();
}

config::RunConfig load_config(const Common& c) {
  return c.config.empty() ? config::RunConfig() : config::RunConfig::load(c.config);
}

std::string join(const std::vector<std::string>& args) {
  std::string s;
  for (const auto& a : args) s += (s.empty() ? "" : " ") + a;
  return s;
}

/// Appends a provenance record next to the primary output.
void record(const fs::path& output, const std::vector<std::string>& args, const Common& c,
            const config::RunConfig& cfg, const std::vector<fs::path>& inputs,
            const std::vector<fs::path>& outputs) {
  io::Entries e = {{"command", args.empty() ? "" : args.front()},
                   {"args", join(args)},
                   {"version", LSM_VERSION},
                   {"seed", c.seed ? std::to_string(*c.seed) : "none"},
                   {"config_sha256", io::sha256_hex(cfg.to_text())}};
  for (const auto& in : inputs) e.emplace_back("input", in.string() + ":" + io::sha256_file(in));
  for (const auto& o : outputs) e.emplace_back("output", o.string() + ":" + io::sha256_file(o));
  for (const auto& [k, v] : io::parse_entries(cfg.to_text())) e.emplace_back("config." + k, v);
  auto path = output;
  path += ".manifest";
  io::append_manifest(path, e);
}

struct Labeled {
  std::vector<frames::SensorFrame> frames;
  std::vector<int> labels;
};

Labeled labeled_frames(std::vector<frames::SensorFrame> all) {
  Labeled l;
  for (auto& f : all) {
    const int c = activity_class_index(f.window_label);
    if (c < 0) continue;
    l.labels.push_back(c);
    l.frames.push_back(std::move(f));
  }
  if (l.frames.empty()) throw InvalidArgument("no labeled windows in the input");
  return l;
}

std::vector<std::size_t> signal_order(const io::Checkpoint& ckpt) {
  const auto v = io::manifest_value(ckpt.meta, "signal_order");
  if (v.empty()) return {};
  std::vector<std::size_t> perm;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) perm.push_back(std::stoul(item));
  if (perm.size() != kNumSignals) throw SchemaError("checkpoint signal order has the wrong length");
  return perm;
}

void apply_order(std::vector<frames::SensorFrame>& frames, const std::vector<std::size_t>& perm) {
  if (perm.empty()) return;
  for (auto& f : frames) f = masking::reorder_frame(f, perm);
}

std::string class_column(std::size_t k) {
  return "ap_" + std::string(activity_name(activity_from_index(static_cast<int>(k))));
}

io::Table report_table(const std::string& method, const eval::ClsReport& r) {
  io::Table t;
  t.header = {"task", "method", "accuracy", "map"};
  for (std::size_t k = 0; k < r.per_class_ap.size(); ++k) t.header.push_back(class_column(k));
  std::vector<std::string> row = {"activity", method, format_double(r.accuracy), format_double(r.map)};
  for (double ap : r.per_class_ap) row.push_back(format_double(ap));
  t.rows.push_back(row);
  return t;
}

io::Table confusion_table(const eval::ClsReport& r) {
  io::Table t;
  t.header = {"true"};
  for (std::size_t k = 0; k < r.confusion.size(); ++k) {
    t.header.emplace_back(activity_name(activity_from_index(static_cast<int>(k))));
  }
  for (std::size_t k = 0; k < r.confusion.size(); ++k) {
    std::vector<std::string> row = {t.header[k + 1]};
    for (auto n : r.confusion[k]) row.push_back(std::to_string(n));
    t.rows.push_back(row);
  }
  return t;
}

// --- Commands ---------------------------------------------------------------

struct SynthOpts {
  Common c;
  std::optional<int> subjects, windows;
  bool labeled = false;
};

void synth(const SynthOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  auto opts = cfg.corpus_options(*o.c.seed);
  if (o.subjects) opts.subjects = *o.subjects;
  if (o.windows) opts.windows_per_subject = *o.windows;
  if (o.labeled) opts.labeled = true;
  if (opts.subjects <= 0 || opts.windows_per_subject <= 0) throw InvalidArgument("subjects and windows must be > 0");
  const auto frames = frames::generate_frames(opts, cfg.feature_config());
  io::write_windows(o.c.out, frames);
  record(o.c.out, args, o.c, cfg, {}, {o.c.out});
  out << "wrote " << frames.size() << " windows to " << o.c.out << "\n";
}

struct FeaturizeOpts {
  Common c;
  std::string in, norm;
};

void featurize(const FeaturizeOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  const auto frames = io::read_windows(o.in);
  if (frames.empty()) throw InvalidArgument("no windows in " + o.in);
  const auto split = frames::split_by_subject(frames, cfg.num("split.train_fraction"), *o.c.seed);
  const auto norm = o.norm.empty() ? frames::fit_norm(frames, split.train) : io::read_norm(o.norm);
  std::vector<frames::SensorFrame> train, test;
  for (auto i : split.train) train.push_back(frames::prepare_frame(frames[i], norm));
  for (auto i : split.test) test.push_back(frames::prepare_frame(frames[i], norm));
  const fs::path dir = o.c.out;
  const auto train_path = dir / "train.lsmw", test_path = dir / "test.lsmw", norm_path = dir / "norm.txt";
  io::write_windows(train_path, train);
  io::write_windows(test_path, test);
  io::write_norm(norm_path, norm);
  std::vector<fs::path> inputs{o.in};
  if (!o.norm.empty()) inputs.push_back(o.norm);
  record(dir / "featurize", args, o.c, cfg, inputs, {train_path, test_path, norm_path});
  out << "train " << train.size() << " windows, test " << test.size() << " windows -> " << dir.string() << "\n";
}

struct PretrainOpts {
  Common c;
  std::string train, eval, norm, curve;
  std::optional<std::size_t> steps;
};

void pretrain(const PretrainOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  auto train = io::read_windows(o.train);
  std::vector<frames::SensorFrame> eval_frames;
  if (!o.eval.empty()) eval_frames = io::read_windows(o.eval);
  const auto norm = o.norm.empty() ? frames::NormStats{} : io::read_norm(o.norm);
  auto hp = cfg.pretrain_params();
  if (o.steps) hp.steps = *o.steps;
  hp.warmup = std::min(hp.warmup, hp.steps);

  std::vector<std::size_t> perm;
  const auto policy = masking::order_policy_from_name(cfg.str("model.signal_order"));
  if (policy != masking::OrderPolicy::Clustered) {
    const auto corr = masking::correlation_matrix(train);
    perm = masking::order_signals(corr.r, policy, derive_seed(*o.c.seed, 11)).permutation;
    apply_order(train, perm);
    apply_order(eval_frames, perm);
  }

  model::MaeModel m(cfg.model_config(), derive_seed(*o.c.seed, 1));
  const std::size_t every = std::max<std::size_t>(1, hp.steps / 20);
  const auto result = model::pretrain(m, train, eval_frames, hp, derive_seed(*o.c.seed, 2),
                                      [&](const model::LossPoint& p) {
                                        if ((p.step + 1) % every == 0 || p.step + 1 == hp.steps) {
                                          out << "step " << p.step + 1 << " loss " << p.loss << " lr " << p.lr << "\n";
                                        }
                                      });
  auto ckpt = io::make_checkpoint(m, norm, result.optimizer);
  ckpt.meta = {{"steps", std::to_string(result.steps)},
               {"seed", std::to_string(*o.c.seed)},
               {"data_hours", format_double(result.data_hours)},
               {"final_loss", format_double(result.train_curve.empty() ? 0.0 : result.train_curve.back().loss)}};
  if (!perm.empty()) {
    std::string s;
    for (auto p : perm) s += (s.empty() ? "" : ",") + std::to_string(p);
    ckpt.meta.emplace_back("signal_order", s);
  }
  io::write_checkpoint(o.c.out, ckpt);

  const fs::path curve = o.curve.empty() ? fs::path(o.c.out + ".curve.csv") : fs::path(o.curve);
  io::Table t{{"step", "split", "loss", "lr"}, {}};
  for (const auto& p : result.train_curve) {
    t.rows.push_back({std::to_string(p.step + 1), "train", format_double(p.loss), format_double(p.lr)});
  }
  for (const auto& p : result.eval_curve) {
    t.rows.push_back({std::to_string(p.step), "eval", format_double(p.loss), format_double(p.lr)});
  }
  io::write_csv(curve, t);
  std::vector<fs::path> inputs = {o.train};
  if (!o.eval.empty()) inputs.emplace_back(o.eval);
  if (!o.norm.empty()) inputs.emplace_back(o.norm);
  record(o.c.out, args, o.c, cfg, inputs, {o.c.out, curve});
  out << "checkpoint " << o.c.out << " (" << m.num_params() << " parameters, " << result.steps << " steps)\n";
}

struct EvalGenOpts {
  Common c;
  std::string test, method, checkpoint, task;
  std::optional<std::size_t> duration;
};

void eval_gen(const EvalGenOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  auto test = io::read_windows(o.test);
  std::vector<eval::GenTaskSpec> specs = cfg.task_specs(*o.c.seed);
  if (!o.task.empty() || o.duration) {
    const auto task = o.task.empty() ? eval::GenTask::TemporalInterpolation : eval::task_from_name(o.task);
    std::vector<eval::GenTaskSpec> chosen;
    for (const auto& s : specs) {
      if (s.task != task) continue;
      if (o.duration && task != eval::GenTask::RandomImputation && s.duration != *o.duration) continue;
      chosen.push_back(s);
    }
    if (chosen.empty()) {
      eval::GenTaskSpec s;
      s.task = task;
      s.duration = task == eval::GenTask::RandomImputation ? 0 : o.duration.value_or(60);
      s.ratio = cfg.num("eval.random_ratio");
      s.sensor_fraction = cfg.num("eval.sensor_fraction");
      s.seed = derive_seed(*o.c.seed, (static_cast<std::uint64_t>(task) << 32) + s.duration);
      chosen.push_back(s);
    }
    specs = chosen;
  }

  eval::Imputer imputer;
  masking::PatchGrid grid = cfg.model_config().grid();
  std::vector<fs::path> inputs = {o.test};
  if (o.method == "model") {
    if (o.checkpoint.empty()) throw InvalidArgument("--method model needs --checkpoint");
    const auto ckpt = io::read_checkpoint(o.checkpoint);
    apply_order(test, signal_order(ckpt));
    auto m = std::make_shared<const model::MaeModel>(io::restore_model(ckpt));
    grid = m->grid();
    imputer = eval::model_imputer(m);
    inputs.emplace_back(o.checkpoint);
  } else {
    imputer = eval::baseline_imputer(baselines::method_from_name(o.method));
  }
  const auto results = eval::eval_generative(imputer, o.method, test, specs, grid);
  io::Table t{{"task", "duration", "method", "mae", "mse", "n"}, {}};
  for (const auto& r : results) {
    t.rows.push_back({r.task, std::to_string(r.duration), r.method, format_double(r.mae), format_double(r.mse),
                      std::to_string(r.n)});
    out << r.task << " " << r.duration << " " << r.method << " mae " << r.mae << " mse " << r.mse << "\n";
  }
  io::write_csv(o.c.out, t);
  record(o.c.out, args, o.c, cfg, inputs, {o.c.out});
}

struct ClsOpts {
  Common c;
  std::string checkpoint, train, test, kind = "linear", confusion;
  bool supervised = false;
  std::optional<std::size_t> k;
};

void write_cls(const ClsOpts& o, const std::string& method, const eval::ClsReport& r,
               const std::vector<std::string>& args, const config::RunConfig& cfg,
               const std::vector<fs::path>& inputs, std::ostream& out) {
  io::write_csv(o.c.out, report_table(method, r));
  std::vector<fs::path> outputs = {o.c.out};
  const fs::path confusion = o.confusion.empty() ? fs::path(o.c.out + ".confusion.csv") : fs::path(o.confusion);
  io::write_csv(confusion, confusion_table(r));
  outputs.push_back(confusion);
  record(o.c.out, args, o.c, cfg, inputs, outputs);
  out << method << " accuracy " << r.accuracy << " mAP " << r.map << "\n";
}

void probe(const ClsOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  const auto ckpt = io::read_checkpoint(o.checkpoint);
  const auto perm = signal_order(ckpt);
  auto train = labeled_frames(io::read_windows(o.train));
  auto test = labeled_frames(io::read_windows(o.test));
  apply_order(train.frames, perm);
  apply_order(test.frames, perm);
  const auto m = io::restore_model(ckpt);
  const auto kind = eval::probe_from_name(o.kind);
  auto embed = [&](const std::vector<frames::SensorFrame>& fs_) {
    std::vector<std::vector<double>> e;
    for (const auto& f : fs_) {
      auto em = m.embed(f);
      e.push_back(kind == eval::ProbeKind::Linear ? std::move(em.pooled) : std::move(em.patches));
    }
    return e;
  };
  const auto etrain = embed(train.frames), etest = embed(test.frames);
  const auto classes = static_cast<std::size_t>(kNumActivities);
  const auto probe = eval::train_probe(etrain, train.labels, kind, classes, m.grid(), m.config().enc_dim,
                                       cfg.train_params("probe"), *o.c.seed);
  const auto scores = eval::probe_scores(probe, etest, m.grid(), m.config().enc_dim);
  write_cls(o, std::string(eval::probe_name(kind)) + "-probe", eval::cls_metrics(scores, test.labels, classes),
            args, cfg, {o.checkpoint, o.train, o.test}, out);
}

void finetune(const ClsOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  if (o.supervised == !o.checkpoint.empty()) {
    throw InvalidArgument("finetune needs exactly one of --checkpoint or --supervised");
  }
  auto train = labeled_frames(io::read_windows(o.train));
  auto test = labeled_frames(io::read_windows(o.test));
  const auto classes = static_cast<std::size_t>(kNumActivities);
  if (o.k) {
    Labeled sub;
    for (auto i : eval::few_shot_subset(train.labels, *o.k, classes, derive_seed(*o.c.seed, 5))) {
      sub.frames.push_back(train.frames[i]);
      sub.labels.push_back(train.labels[i]);
    }
    train = std::move(sub);
  }
  const auto hp = cfg.train_params("finetune");
  std::vector<fs::path> inputs = {o.train, o.test};
  std::optional<eval::Classifier> clf;
  if (o.supervised) {
    clf = eval::supervised(cfg.model_config(), train.frames, train.labels, classes, hp, *o.c.seed);
  } else {
    const auto ckpt = io::read_checkpoint(o.checkpoint);
    const auto perm = signal_order(ckpt);
    apply_order(train.frames, perm);
    apply_order(test.frames, perm);
    clf = eval::fine_tune(io::restore_model(ckpt), train.frames, train.labels, classes, hp, *o.c.seed);
    inputs.emplace_back(o.checkpoint);
  }
  const auto scores = eval::classifier_scores(*clf, test.frames);
  write_cls(o, o.supervised ? "supervised" : "finetune", eval::cls_metrics(scores, test.labels, classes), args, cfg,
            inputs, out);
}

struct FewShotOpts {
  Common c;
  std::string checkpoint, train, test;
  std::vector<std::size_t> ks;
  std::optional<std::size_t> seeds;
};

void fewshot(const FewShotOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  const auto ckpt = io::read_checkpoint(o.checkpoint);
  const auto perm = signal_order(ckpt);
  auto train = labeled_frames(io::read_windows(o.train));
  auto test = labeled_frames(io::read_windows(o.test));
  apply_order(train.frames, perm);
  apply_order(test.frames, perm);
  const auto pretrained = io::restore_model(ckpt);
  const auto classes = static_cast<std::size_t>(kNumActivities);
  const auto hp = cfg.train_params("finetune");
  const auto ks = o.ks.empty() ? cfg.counts("fewshot.ks") : o.ks;
  const auto seeds = o.seeds.value_or(cfg.count("fewshot.seeds"));
  io::Table t{{"k", "seed", "method", "accuracy", "map"}, {}};
  for (auto k : ks) {
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto run_seed = derive_seed(*o.c.seed, s);
      std::vector<frames::SensorFrame> sub;
      std::vector<int> labels;
      for (auto i : eval::few_shot_subset(train.labels, k, classes, run_seed)) {
        sub.push_back(train.frames[i]);
        labels.push_back(train.labels[i]);
      }
      for (const std::string method : {"finetune", "supervised"}) {
        const auto clf = method == "finetune"
                             ? eval::fine_tune(pretrained, sub, labels, classes, hp, run_seed)
                             : eval::supervised(pretrained.config(), sub, labels, classes, hp, run_seed);
        const auto r = eval::cls_metrics(eval::classifier_scores(clf, test.frames), test.labels, classes);
        t.rows.push_back({std::to_string(k), std::to_string(s), method, format_double(r.accuracy),
                          format_double(r.map)});
        out << "k=" << k << " seed=" << s << " " << method << " accuracy " << r.accuracy << "\n";
      }
    }
  }
  io::write_csv(o.c.out, t);
  record(o.c.out, args, o.c, cfg, {o.checkpoint, o.train, o.test}, {o.c.out});
}

struct SweepOpts {
  Common c;
  std::string train, test, manifest_dir;
};

void sweep(const SweepOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  const auto train = io::read_windows(o.train);
  auto test = io::read_windows(o.test);
  const auto cap = cfg.count("sweep.test_frames");
  if (test.size() > cap) test.resize(cap);
  scaling::SweepGrid grid;
  grid.variants = cfg.list("sweep.variants");
  grid.kind = frames::slice_kind_from_name(cfg.str("sweep.slice_kind"));
  grid.slice_sizes = cfg.counts("sweep.slice_sizes");
  grid.step_budgets = cfg.counts("sweep.step_budgets");
  grid.patch_time = cfg.count("model.patch_time");
  grid.patch_signals = cfg.count("model.patch_signals");
  grid.train = cfg.pretrain_params();
  const fs::path dir = o.manifest_dir.empty() ? fs::path(o.c.out + ".runs") : fs::path(o.manifest_dir);
  const auto runs = scaling::run_sweep(grid, train, test, dir, *o.c.seed, [&](const scaling::ScalingRun& r) {
    out << (r.resumed ? "resumed " : "trained ") << r.variant << " size " << r.slice_size << " steps " << r.steps
        << " loss " << r.eval_loss << "\n";
  });
  io::Table t{{"variant", "slice_kind", "slice_size", "data_hours", "params", "steps", "flops", "loss", "status"}, {}};
  for (const auto& r : runs) {
    t.rows.push_back({r.variant, std::string(frames::slice_kind_name(r.kind)), std::to_string(r.slice_size),
                      format_double(r.data_hours), std::to_string(r.param_count), std::to_string(r.steps),
                      format_double(r.compute), format_double(r.eval_loss), r.diverged ? "diverged" : "done"});
  }
  io::write_csv(o.c.out, t);
  record(o.c.out, args, o.c, cfg, {o.train, o.test}, {o.c.out});
}

struct FitOpts {
  Common c;
  std::string in, x = "flops", y = "loss";
  bool fix_c = false;
};

void fit(const FitOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  const auto t = io::read_csv(o.in);
  const auto xi = t.column(o.x), yi = t.column(o.y);
  std::optional<std::size_t> si;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "status") si = i;
  }
  std::vector<double> xs, ys;
  for (const auto& row : t.rows) {
    if (si && row[*si] != "done") continue;
    double x = 0, y = 0;
    try {
      x = std::stod(row[xi]);
      y = std::stod(row[yi]);
    } catch (const std::exception&) {
      throw SchemaError("non-numeric value in " + o.in);
    }
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    xs.push_back(x);
    ys.push_back(y);
  }
  scaling::FitOptions fo;
  fo.fix_c_zero = o.fix_c || cfg.flag("fit.fix_c_zero");
  fo.max_iterations = cfg.count("fit.max_iterations");
  const auto f = scaling::fit_powerlaw(xs, ys, fo);
  io::Entries e = {{"a", format_double(f.a)},
                   {"b", format_double(f.b)},
                   {"c", format_double(f.c)},
                   {"residual", format_double(f.residual)},
                   {"iterations", std::to_string(f.iterations)},
                   {"points", std::to_string(xs.size())}};
  const char* names[] = {"a", "b", "c"};
  for (int r = 0; r < 3; ++r) {
    for (int c = r; c < 3; ++c) {
      e.emplace_back(std::string("cov_") + names[r] + names[c], format_double(f.covariance[static_cast<std::size_t>(r * 3 + c)]));
    }
  }
  io::atomic_write(o.c.out, io::format_entries(e));
  record(o.c.out, args, o.c, cfg, {o.in}, {o.c.out});
  out << "a=" << format_double(f.a) << " b=" << format_double(f.b) << " c=" << format_double(f.c) << "\n";
}

struct PlotOpts {
  Common c;
  std::string in, kind;
};

void export_plot(const PlotOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = load_config(o.c);
  const auto kind = plot::kind_from_name(o.kind);
  const auto svg = plot::render(io::read_csv(o.in), kind);
  io::atomic_write(o.c.out, svg);
  record(o.c.out, args, o.c, cfg, {o.in}, {o.c.out});
  out << "wrote " << o.c.out << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wearable sensor-foundation-model workbench", "lsm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LSM_VERSION);

  SynthOpts so;
  auto* s_synth = app.add_subcommand("synth", "Synthesize subjects and write per-minute feature windows");
  add_common(s_synth, so.c, true);
  s_synth->add_option("--subjects", so.subjects, "number of synthetic subjects");
  s_synth->add_option("--windows", so.windows, "windows per subject");
  s_synth->add_flag("--labeled", so.labeled, "centre windows on activity sessions");

  FeaturizeOpts fo;
  auto* s_feat = app.add_subcommand("featurize", "Split by subject, fit normalization, gap-fill and z-score");
  add_common(s_feat, fo.c, true);
  s_feat->add_option("--in", fo.in, "window file from synth")->required();
  s_feat->add_option("--norm", fo.norm, "apply these normalization statistics instead of fitting");

  PretrainOpts po;
  auto* s_pre = app.add_subcommand("pretrain", "Masked-autoencoder pretraining");
  add_common(s_pre, po.c, true);
  s_pre->add_option("--train", po.train, "prepared training windows")->required();
  s_pre->add_option("--eval", po.eval, "prepared held-out windows for the eval curve");
  s_pre->add_option("--norm", po.norm, "normalization statistics stored in the checkpoint");
  s_pre->add_option("--curve", po.curve, "loss-curve CSV (default: <out>.curve.csv)");
  s_pre->add_option("--steps", po.steps, "override pretrain.steps");

  EvalGenOpts eo;
  auto* s_eval = app.add_subcommand("eval-gen", "Generative tasks: imputation, interpolation, extrapolation");
  add_common(s_eval, eo.c, true);
  s_eval->add_option("--test", eo.test, "prepared test windows")->required();
  s_eval->add_option("--method", eo.method, "mean, nearest, linear, zero or model")->required();
  s_eval->add_option("--checkpoint", eo.checkpoint, "checkpoint for --method model");
  s_eval->add_option("--task", eo.task, "random, interpolation, sensor or extrapolation");
  s_eval->add_option("--duration", eo.duration, "masked span in minutes");

  ClsOpts pr;
  auto* s_probe = app.add_subcommand("probe", "Frozen-encoder linear or convolutional probe");
  add_common(s_probe, pr.c, true);
  s_probe->add_option("--checkpoint", pr.checkpoint, "pretrained checkpoint")->required();
  s_probe->add_option("--train", pr.train, "prepared labeled training windows")->required();
  s_probe->add_option("--test", pr.test, "prepared labeled test windows")->required();
  s_probe->add_option("--kind", pr.kind, "linear or conv");
  s_probe->add_option("--confusion", pr.confusion, "confusion CSV (default: <out>.confusion.csv)");

  ClsOpts ft;
  auto* s_ft = app.add_subcommand("finetune", "Fine-tune a checkpoint, or train the same model from scratch");
  add_common(s_ft, ft.c, true);
  s_ft->add_option("--checkpoint", ft.checkpoint, "pretrained checkpoint");
  s_ft->add_flag("--supervised", ft.supervised, "random initialization instead of a checkpoint");
  s_ft->add_option("--train", ft.train, "prepared labeled training windows")->required();
  s_ft->add_option("--test", ft.test, "prepared labeled test windows")->required();
  s_ft->add_option("--k", ft.k, "use k labeled windows per class");
  s_ft->add_option("--confusion", ft.confusion, "confusion CSV (default: <out>.confusion.csv)");

  FewShotOpts fs_;
  auto* s_few = app.add_subcommand("fewshot", "Few-shot fine-tuning versus supervised training");
  add_common(s_few, fs_.c, true);
  s_few->add_option("--checkpoint", fs_.checkpoint, "pretrained checkpoint")->required();
  s_few->add_option("--train", fs_.train, "prepared labeled training windows")->required();
  s_few->add_option("--test", fs_.test, "prepared labeled test windows")->required();
  s_few->add_option("--ks", fs_.ks, "labels per class (default fewshot.ks)")->delimiter(',');
  s_few->add_option("--seeds", fs_.seeds, "repetitions per k (default fewshot.seeds)");

  SweepOpts sw;
  auto* s_sweep = app.add_subcommand("sweep", "Scaling sweep over variants, data slices and step budgets");
  add_common(s_sweep, sw.c, true);
  s_sweep->add_option("--train", sw.train, "prepared training windows")->required();
  s_sweep->add_option("--test", sw.test, "prepared test windows")->required();
  s_sweep->add_option("--manifest-dir", sw.manifest_dir, "per-run manifests (default: <out>.runs)");

  FitOpts fi;
  auto* s_fit = app.add_subcommand("fit-powerlaw", "Fit L = a C^b + c to a runs table");
  add_common(s_fit, fi.c, false);
  s_fit->add_option("--in", fi.in, "CSV with compute and loss columns")->required();
  s_fit->add_option("--x", fi.x, "compute column");
  s_fit->add_option("--y", fi.y, "loss column");
  s_fit->add_flag("--fix-c-zero", fi.fix_c, "fit a pure power law");

  PlotOpts pl;
  auto* s_plot = app.add_subcommand("export-plot", "Render a CSV as SVG");
  add_common(s_plot, pl.c, false);
  s_plot->add_option("--in", pl.in, "input CSV")->required();
  s_plot->add_option("--kind", pl.kind, "loss-curve, scaling, pareto or confusion")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInvalidArgument;
  }

  try {
    if (*s_synth) synth(so, args, out);
    else if (*s_feat) featurize(fo, args, out);
    else if (*s_pre) pretrain(po, args, out);
    else if (*s_eval) eval_gen(eo, args, out);
    else if (*s_probe) probe(pr, args, out);
    else if (*s_ft) finetune(ft, args, out);
    else if (*s_few) fewshot(fs_, args, out);
    else if (*s_sweep) sweep(sw, args, out);
    else if (*s_fit) fit(fi, args, out);
    else if (*s_plot) export_plot(pl, args, out);
  } catch (const MissingInput& e) {
    err << "error: missing input: " << e.path() << "\n";
    return kMissingInput;
  } catch (const SchemaError& e) {
    err << "error: schema: " << e.what() << "\n";
    return kSchema;
  } catch (const InvalidArgument& e) {
    err << "error: invalid argument: " << e.what() << "\n";
    return kInvalidArgument;
  } catch (const scaling::FitFailed& e) {
    err << "error: " << e.what() << " (best a=" << format_double(e.best().a) << " b=" << format_double(e.best().b)
        << " c=" << format_double(e.best().c) << ")\n";
    return kRuntimeFailure;
  } catch (const RuntimeFailure& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace lsm::cli
