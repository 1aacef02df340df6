#include "lsm/config.hpp"

#include <sstream>

#include "lsm/io.hpp"

namespace lsm::config {

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      // Feature extraction
      {"features.rr_outlier_fraction", "0.2"},
      {"features.rr_window_minutes", "5"},
      {"features.entropy_bin_ms", "10"},
      {"features.hpf_cutoff_hz", "0.25"},
      {"features.bpf_low_hz", "0.5"},
      {"features.bpf_high_hz", "11"},
      {"features.jerk_floor", "-10"},
      {"features.step_refractory_s", "0.3"},
      {"features.step_min_peak", "0.01"},
      {"features.sleep_bins", "16"},
      {"features.sleep_bin_lo", "0.001"},
      {"features.sleep_bin_hi", "8"},
      {"features.scl_median_minutes", "5"},
      {"features.scl_lowpass_hz", "0.05"},
      {"features.covariance_condition_cap", "10000"},
      {"features.log_floor", "1e-10"},
      // Synthetic corpus
      {"synth.subjects", "10"},
      {"synth.windows_per_subject", "10"},
      {"synth.labeled", "false"},
      {"synth.timeline_days", "7"},
      {"synth.wear_gap_rate", "0.05"},
      {"synth.sensor_dropout_rate", "0.02"},
      {"synth.hr_sigma", "1.5"},
      {"synth.hr_drift_sigma", "0.15"},
      {"synth.rr_jitter", "1"},
      {"synth.accel_sigma", "0.015"},
      {"synth.fidget_rate", "0.02"},
      {"synth.scl_sigma", "0.01"},
      {"synth.scl_drift_sigma", "0.002"},
      {"synth.temp_sigma", "0.05"},
      {"synth.pressure_sigma", "0.03"},
      // Data split
      {"split.train_fraction", "0.8"},
      // Model
      {"model.variant", "tiny"},
      {"model.patch_time", "10"},
      {"model.patch_signals", "5"},
      {"model.signal_order", "clustered"},
      // Pretraining
      {"pretrain.batch", "16"},
      {"pretrain.steps", "2000"},
      {"pretrain.warmup", "100"},
      {"pretrain.base_lr", "0.001"},
      {"pretrain.mask_ratio", "0.8"},
      {"pretrain.strategy", "random"},
      {"pretrain.flip_p", "0"},
      {"pretrain.stretch_max", "1"},
      {"pretrain.noise_sigma", "0"},
      {"pretrain.beta1", "0.9"},
      {"pretrain.beta2", "0.95"},
      {"pretrain.eps", "1e-8"},
      {"pretrain.weight_decay", "0.0001"},
      {"pretrain.clip", "1"},
      {"pretrain.eval_every", "0"},
      {"pretrain.eval_frames", "64"},
      // Generative evaluation
      {"eval.tasks", "random,interpolation,sensor,extrapolation"},
      {"eval.durations", "10,20,30,60,120"},
      {"eval.random_ratio", "0.8"},
      {"eval.sensor_fraction", "0.67"},
      // Linear / conv probes
      {"probe.steps", "300"},
      {"probe.batch", "16"},
      {"probe.warmup", "15"},
      {"probe.base_lr", "0.001"},
      {"probe.noise_sigma", "0"},
      {"probe.weight_decay", "0.0001"},
      {"probe.clip", "1"},
      {"probe.conv_channels", "16"},
      // Fine-tuning and supervised training
      {"finetune.steps", "300"},
      {"finetune.batch", "16"},
      {"finetune.warmup", "15"},
      {"finetune.base_lr", "0.0005"},
      {"finetune.noise_sigma", "0.1"},
      {"finetune.weight_decay", "0.0001"},
      {"finetune.clip", "1"},
      // Few-shot
      {"fewshot.ks", "5,10,15,20"},
      {"fewshot.seeds", "3"},
      // Scaling sweeps
      {"sweep.variants", "tiny"},
      {"sweep.slice_kind", "sample"},
      {"sweep.slice_sizes", "64,128,256"},
      {"sweep.step_budgets", "200"},
      {"sweep.test_frames", "64"},
      // Power-law fit
      {"fit.max_iterations", "200"},
      {"fit.fix_c_zero", "false"},
  };
  return d;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  for (const auto& [k, v] : io::parse_entries(text)) {
    if (!c.has(k)) throw SchemaError("unknown config key: " + k);
    c.values_[k] = v;
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!has(key)) throw InvalidArgument("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key: " + key);
  return it->second;
}

double RunConfig::num(const std::string& key) const {
  const auto& v = str(key);
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw SchemaError("config " + key + " is not a number: " + v);
  return x;
}

std::size_t RunConfig::count(const std::string& key) const {
  const auto& v = str(key);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw SchemaError("config " + key + " is not a non-negative integer: " + v);
  }
  return static_cast<std::size_t>(std::stoull(v));
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw SchemaError("config " + key + " is not a boolean: " + v);
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> RunConfig::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : list(key)) {
    if (item.find_first_not_of("0123456789") != std::string::npos) {
      throw SchemaError("config " + key + " has a non-integer entry: " + item);
    }
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

std::string RunConfig::to_text() const {
  io::Entries e;
  for (const auto& [k, v] : defaults()) e.emplace_back(k, values_.at(k));
  return io::format_entries(e);
}

features::FeatureConfig RunConfig::feature_config() const {
  features::FeatureConfig f;
  f.rr_outlier_fraction = num("features.rr_outlier_fraction");
  f.rr_window_minutes = num("features.rr_window_minutes");
  f.entropy_bin_ms = num("features.entropy_bin_ms");
  f.hpf_cutoff_hz = num("features.hpf_cutoff_hz");
  f.bpf_low_hz = num("features.bpf_low_hz");
  f.bpf_high_hz = num("features.bpf_high_hz");
  f.jerk_floor = num("features.jerk_floor");
  f.step_refractory_s = num("features.step_refractory_s");
  f.step_min_peak = num("features.step_min_peak");
  f.sleep_bins = static_cast<int>(count("features.sleep_bins"));
  f.sleep_bin_lo = num("features.sleep_bin_lo");
  f.sleep_bin_hi = num("features.sleep_bin_hi");
  f.scl_median_minutes = num("features.scl_median_minutes");
  f.scl_lowpass_hz = num("features.scl_lowpass_hz");
  f.covariance_condition_cap = num("features.covariance_condition_cap");
  f.log_floor = num("features.log_floor");
  return f;
}

frames::CorpusOptions RunConfig::corpus_options(std::uint64_t seed) const {
  frames::CorpusOptions o;
  o.subjects = static_cast<int>(count("synth.subjects"));
  o.windows_per_subject = static_cast<int>(count("synth.windows_per_subject"));
  o.labeled = flag("synth.labeled");
  o.population.timeline_days = static_cast<int>(count("synth.timeline_days"));
  o.missingness = {num("synth.wear_gap_rate"), num("synth.sensor_dropout_rate")};
  o.noise.hr_sigma = num("synth.hr_sigma");
  o.noise.hr_drift_sigma = num("synth.hr_drift_sigma");
  o.noise.rr_jitter = num("synth.rr_jitter");
  o.noise.accel_sigma = num("synth.accel_sigma");
  o.noise.fidget_rate = num("synth.fidget_rate");
  o.noise.scl_sigma = num("synth.scl_sigma");
  o.noise.scl_drift_sigma = num("synth.scl_drift_sigma");
  o.noise.temp_sigma = num("synth.temp_sigma");
  o.noise.pressure_sigma = num("synth.pressure_sigma");
  o.seed = seed;
  return o;
}

model::ModelConfig RunConfig::model_config() const {
  auto c = model::variant(str("model.variant"));
  c.patch_time = count("model.patch_time");
  c.patch_signals = count("model.patch_signals");
  c.validate();
  return c;
}

model::PretrainParams RunConfig::pretrain_params() const {
  model::PretrainParams p;
  p.batch = count("pretrain.batch");
  p.steps = count("pretrain.steps");
  p.warmup = count("pretrain.warmup");
  p.base_lr = num("pretrain.base_lr");
  p.mask_ratio = num("pretrain.mask_ratio");
  p.strategy = masking::strategy_from_name(str("pretrain.strategy"));
  p.augment = {num("pretrain.flip_p"), num("pretrain.stretch_max"), num("pretrain.noise_sigma")};
  p.adamw = {num("pretrain.beta1"), num("pretrain.beta2"), num("pretrain.eps"), num("pretrain.weight_decay")};
  p.clip = num("pretrain.clip");
  p.eval_every = count("pretrain.eval_every");
  p.eval_frames = count("pretrain.eval_frames");
  return p;
}

eval::TrainParams RunConfig::train_params(const std::string& prefix) const {
  if (prefix != "probe" && prefix != "finetune") throw InvalidArgument("no training section " + prefix);
  eval::TrainParams t;
  t.steps = count(prefix + ".steps");
  t.batch = count(prefix + ".batch");
  t.warmup = count(prefix + ".warmup");
  t.base_lr = num(prefix + ".base_lr");
  t.noise_sigma = num(prefix + ".noise_sigma");
  t.adamw.weight_decay = num(prefix + ".weight_decay");
  t.clip = num(prefix + ".clip");
  return t;
}

std::vector<eval::GenTaskSpec> RunConfig::task_specs(std::uint64_t seed) const {
  std::vector<eval::GenTaskSpec> out;
  for (const auto& name : list("eval.tasks")) {
    const auto task = eval::task_from_name(name);
    eval::GenTaskSpec s;
    s.task = task;
    s.ratio = num("eval.random_ratio");
    s.sensor_fraction = num("eval.sensor_fraction");
    if (task == eval::GenTask::RandomImputation) {
      s.duration = 0;
      s.seed = derive_seed(seed, static_cast<std::uint64_t>(task) << 32);
      out.push_back(s);
      continue;
    }
    for (auto d : counts("eval.durations")) {
      s.duration = d;
      s.seed = derive_seed(seed, (static_cast<std::uint64_t>(task) << 32) + d);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace lsm::config
