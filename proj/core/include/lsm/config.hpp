#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lsm/eval.hpp"
#include "lsm/features.hpp"
#include "lsm/frames.hpp"
#include "lsm/model.hpp"

namespace lsm::config {

/// Flat key=value run configuration. Every tunable has a default; loading a
/// file overrides defaults and rejects keys that are not known.
class RunConfig {
 public:
  RunConfig();

  /// Known keys with their default values, in file order.
  static const std::vector<std::pair<std::string, std::string>>& defaults();

  /// Throws MissingInput if the file is absent and SchemaError on unknown keys.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;

  /// All keys in default order, one key=value per line.
  std::string to_text() const;

  features::FeatureConfig feature_config() const;
  frames::CorpusOptions corpus_options(std::uint64_t seed) const;
  model::ModelConfig model_config() const;
  model::PretrainParams pretrain_params() const;
  /// `prefix` is "probe" or "finetune".
  eval::TrainParams train_params(const std::string& prefix) const;
  std::vector<eval::GenTaskSpec> task_specs(std::uint64_t seed) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lsm::config
