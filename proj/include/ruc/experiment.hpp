#pragma once

#include "ruc/config.hpp"
#include "ruc/metrics.hpp"
#include "ruc/robust_train.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ruc {

/// Everything one seed of the pipeline produces, kept in memory so tests
/// can inspect it without touching the filesystem.
struct SeedResult {
  std::uint64_t seed = 0;
  PseudoLabeledDataset dataset;
  /// Fraction of samples whose pseudo-label argmax equals the ground truth.
  double pseudo_accuracy = 0.0;
  Partition initial_partition;
  std::map<Strategy, SelectionQuality> selection;
  CoTrainState ruc;
  BaselineResult baseline;
  Evaluation ruc_eval;
  Evaluation baseline_eval;
  std::map<AttackKind, std::vector<double>> curve_ruc;
  std::map<AttackKind, std::vector<double>> curve_baseline;
};

/// Generated (or loaded) data with the noise model applied.
PseudoLabeledDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
EmbeddingProvider make_provider(const ExperimentConfig& cfg, const PseudoLabeledDataset& dataset,
                                std::uint64_t seed);

double pseudo_label_accuracy(const PseudoLabeledDataset& dataset);

/// Selection quality of all three strategies.
std::map<Strategy, SelectionQuality> compare_strategies(const PseudoLabeledDataset& dataset,
                                                        const SelectionConfig& cfg,
                                                        const EmbeddingProvider& provider);

/// Data, selection, baseline, retraining, evaluation and attack curves.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Writes every per-seed artifact into `dir`.
void write_seed_outputs(const SeedResult& r, const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// manifest.json with the resolved config and a timestamp.
void write_manifest(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& verb,
                    const std::filesystem::path& dir);

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed under <out>/<seed>/. Throws on failure; the CLI maps
/// exceptions to exit codes.
void run_experiment(const ExperimentConfig& cfg);

/// Dataset only.
void run_gen(const ExperimentConfig& cfg, std::uint64_t seed);
/// Partition plus selection quality only.
void run_select(const ExperimentConfig& cfg, std::uint64_t seed);
/// Re-runs the attack sweep on the checkpoints a previous `train` left.
void run_attack(const ExperimentConfig& cfg, std::uint64_t seed);

/// The run directory has nothing to report on.
class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files each seed directory is expected to hold.
const std::vector<std::string>& expected_seed_files();

/// Aggregates every seed directory under `run_dir` into report.json,
/// robustness_summary.csv and confidence_hist.csv. Missing files are listed
/// under "gaps" instead of failing.
nlohmann::json emit_report(const std::filesystem::path& run_dir, int histogram_bins = 10);

}  // namespace ruc
