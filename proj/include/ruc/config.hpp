#pragma once

#include "ruc/attacks.hpp"
#include "ruc/robust_train.hpp"
#include "ruc/synthdata.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ruc {

struct DataConfig {
  /// Dataset file; when set the generator parameters are ignored.
  std::string file;
  int classes = 4;
  int per_class = 500;
  int dim = 16;
  double separation = 4.0;
  double spread = 1.0;
  /// identity | projection
  std::string embedding = "identity";
  int embedding_dim = 8;
};

struct AttackSweep {
  std::vector<AttackKind> kinds = {AttackKind::fgsm, AttackKind::bim};
  std::vector<double> epsilons = {0.0, 0.05, 0.1, 0.2, 0.4};
  int iterations = 5;
  AttackLabel label = AttackLabel::prediction;
};

struct Ablation {
  bool no_cotrain = false;
  bool no_smoothing = false;
  bool mixmatch_only = false;
};

struct ExperimentConfig {
  DataConfig data;
  NoiseModel noise;
  TrainConfig train;
  AttackSweep attack;
  Ablation ablation;
  std::string out = "runs";
  std::vector<std::uint64_t> seeds = {1};

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Training config with the ablation flags folded in and the seed set.
  TrainConfig resolved_train(std::uint64_t seed) const;
};

/// One `[section] key` entry: parses a value into the config and prints it
/// back. The same table drives config files, CLI flags and the manifest.
struct ConfigKey {
  std::string section;
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;

  std::string name() const { return section + "." + key; }
};

const std::vector<ConfigKey>& config_keys();

/// Sets `section.key`; throws ConfigError for unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& dotted, const std::string& value);

/// `[section]` headers, `key = value` lines, `#`/`;` comments. Errors carry
/// `<origin>:<line>:` prefixes.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Round-trips through parse_config.
std::string format_config(const ExperimentConfig& cfg);

/// Every key with the ablations folded in, grouped by section.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace ruc
