#pragma once

#include "ruc/synthdata.hpp"
#include "ruc/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ruc {

enum class Strategy { confidence, metric, hybrid };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct CleanEntry {
  SampleId id = 0;
  ProbVector label;
};

/// Disjoint clean (labeled) and unclean (label discarded) sets.
struct Partition {
  std::vector<CleanEntry> clean;
  std::vector<SampleId> unclean;
  Strategy strategy = Strategy::hybrid;

  std::vector<SampleId> clean_ids() const;
  /// Disjoint, exhaustive over `dataset`, and every clean label a ProbVector.
  bool covers(const PseudoLabeledDataset& dataset) const;
};

struct SelectionConfig {
  Strategy strategy = Strategy::hybrid;
  double tau1 = 0.99;
  int k = 100;

  void validate(int classes) const;
};

/// Clean iff max(y) > tau1 (strict).
Partition select_confidence(const PseudoLabeledDataset& dataset, double tau1);

/// Clean iff the k-nearest-neighbour vote in embedding space (query
/// excluded, votes = neighbours' pseudo-label argmax) has a unique winner
/// equal to the sample's own pseudo-label argmax. Distance ties go to the
/// lower sample id; tied votes count as disagreement.
Partition select_metric(const PseudoLabeledDataset& dataset, const EmbeddingProvider& provider, int k);

/// Intersection of the confidence and metric clean sets.
Partition select_hybrid(const PseudoLabeledDataset& dataset, double tau1,
                        const EmbeddingProvider& provider, int k);

Partition select(const PseudoLabeledDataset& dataset, const SelectionConfig& cfg,
                 const EmbeddingProvider& provider);

/// kNN vote winner per sample, or -1 for a tied vote.
std::vector<int> knn_vote(const Eigen::MatrixXd& embeddings, const std::vector<SampleId>& ids,
                          const std::vector<int>& votes, int classes, int k);

struct Tau2Schedule {
  double start = 0.9;
  double step = 0.02;
  int every = 40;
  double cap = 1.0;
};

/// min(start + step * floor(epoch / every), cap).
double tau2_at(int epoch, const Tau2Schedule& schedule = {});

/// One line per sample in dataset order: `id clean y_1 ... y_C` or `id unclean`.
std::string format_partition(const Partition& partition, const PseudoLabeledDataset& dataset);
void save_partition(const Partition& partition, const PseudoLabeledDataset& dataset,
                    const std::filesystem::path& path);

}  // namespace ruc
