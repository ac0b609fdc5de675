#pragma once

#include "ruc/selection.hpp"
#include "ruc/synthdata.hpp"

#include "json.hpp"

#include <span>
#include <vector>

namespace ruc {

/// Best bijection between predicted and ground-truth classes.
struct AssignmentResult {
  /// permutation[predicted] = ground-truth class.
  std::vector<int> permutation;
  std::size_t matched = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

/// Maximum-weight perfect matching on a square integer matrix (rows to
/// columns), Kuhn-Munkres with potentials. Returns column per row.
std::vector<int> max_weight_assignment(const Eigen::MatrixXi& weights);

/// Contingency counts, row = predicted class, column = ground truth.
Eigen::MatrixXi confusion_matrix(std::span<const int> pred, std::span<const int> gt, int classes);
/// Same, with predictions relabelled through `permutation` first.
Eigen::MatrixXi confusion_matrix(std::span<const int> pred, std::span<const int> gt, int classes,
                                 const std::vector<int>& permutation);

AssignmentResult hungarian_accuracy(std::span<const int> pred, std::span<const int> gt, int classes);

struct CalibrationBucket {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationBucket> buckets;
  std::size_t total = 0;
  double ece = 0.0;
};

/// Bucket m covers ((m-1)/M, m/M]; a confidence of exactly 0 falls in the
/// first bucket.
int calibration_bucket(double confidence, int buckets);

CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct, int buckets = 15);

struct SelectionQuality {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t selected = 0;
  /// Samples whose pseudo-label argmax equals the ground truth.
  std::size_t recoverable = 0;
  bool degenerate = false;
};

/// True positive = clean sample whose label argmax equals its ground truth.
SelectionQuality selection_quality(const Partition& partition, const PseudoLabeledDataset& dataset);

nlohmann::json to_json(const AssignmentResult& a);
nlohmann::json to_json(const CalibrationReport& r);
nlohmann::json to_json(const SelectionQuality& q);
nlohmann::json to_json(const Eigen::MatrixXi& m);

}  // namespace ruc
