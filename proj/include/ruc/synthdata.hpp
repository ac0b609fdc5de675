#pragma once

#include "ruc/network.hpp"
#include "ruc/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ruc {

struct LabeledSample {
  SampleId id = 0;
  FeatureVector x;
  int gt = 0;  // evaluation only

  bool operator==(const LabeledSample&) const = default;
};

struct PseudoLabeledDataset {
  int classes = 0;
  int dim = 0;
  std::vector<LabeledSample> samples;
  /// Empty until a noise model has been applied (or the file carried labels).
  std::vector<ProbVector> pseudo_labels;
  /// Generator cluster means, one per class; empty for loaded data.
  std::vector<FeatureVector> means;
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  bool has_pseudo_labels() const { return !samples.empty() && pseudo_labels.size() == samples.size(); }

  /// D x N, one column per sample in storage order.
  Eigen::MatrixXd feature_matrix() const;
  std::vector<int> ground_truth() const;
  std::vector<int> pseudo_classes() const;
  /// Position of each id in `samples`.
  std::unordered_map<SampleId, std::size_t> index_by_id() const;
};

enum class ConfidenceProfile { onehot, overconfident, tempered };
enum class Corruption { uniform_flip, neighbor_flip };

const char* to_string(ConfidenceProfile p);
const char* to_string(Corruption c);
ConfidenceProfile parse_profile(const std::string& s);
Corruption parse_corruption(const std::string& s);

struct NoiseModel {
  double rate = 0.3;
  ConfidenceProfile profile = ConfidenceProfile::overconfident;
  /// Mean mass on the assigned class for the overconfident profile.
  double peak = 0.99;
  /// Per-sample peak is drawn uniformly from [peak - jitter, peak + jitter],
  /// clipped to 1. Zero gives every sample exactly `peak`.
  double peak_jitter = 0.01;
  /// Tempered profile: softmax(indicator / temperature).
  double temperature = 0.5;
  Corruption corruption = Corruption::neighbor_flip;

  void validate(int classes) const;
  std::string describe() const;
};

PseudoLabeledDataset gen_gaussian_mixture(int classes, int n_per_class, int dim, double separation,
                                          double spread, std::uint64_t seed);

/// Corrupts round(rate * n) uniformly chosen samples and renders every class
/// assignment as a ProbVector. Features are never modified.
PseudoLabeledDataset apply_noise(const PseudoLabeledDataset& dataset, const NoiseModel& model,
                                 std::uint64_t seed);

/// For each class, the other class whose mean is closest (ties to lower index).
std::vector<int> nearest_class_map(const std::vector<FeatureVector>& means);

/// Unsupervised embedding h(x) used by metric-based selection.
class EmbeddingProvider {
 public:
  enum class Mode { identity, random_projection, trained_encoder };

  static EmbeddingProvider identity(int dim);
  /// out_dim x in_dim Gaussian matrix with N(0, 1/out_dim) entries.
  static EmbeddingProvider random_projection(int in_dim, int out_dim, std::uint64_t seed);
  /// Last hidden-layer activations of `net`.
  static EmbeddingProvider trained_encoder(ClassifierNet net);

  Mode mode() const { return mode_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }

  EmbeddingVector embed(const FeatureVector& x) const;
  /// Column-per-sample.
  Eigen::MatrixXd embed_batch(const Eigen::MatrixXd& inputs) const;

 private:
  Mode mode_ = Mode::identity;
  int input_dim_ = 0;
  int output_dim_ = 0;
  Eigen::MatrixXd projection_;
  std::optional<ClassifierNet> encoder_;
};

void save_dataset(const PseudoLabeledDataset& dataset, const std::filesystem::path& path);
PseudoLabeledDataset load_dataset(const std::filesystem::path& path);
std::string format_dataset(const PseudoLabeledDataset& dataset);
PseudoLabeledDataset parse_dataset(const std::string& text);

}  // namespace ruc
