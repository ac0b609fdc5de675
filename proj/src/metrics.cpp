#include "ruc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace ruc {

std::vector<int> max_weight_assignment(const Eigen::MatrixXi& weights) {
  const auto n = static_cast<int>(weights.rows());
  if (weights.cols() != n) throw ShapeError("assignment matrix must be square");
  // Minimise cost = -weight; 1-based arrays with a virtual column 0.
  const long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(static_cast<std::size_t>(n) + 1, 0), v(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> owner(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int row = 1; row <= n; ++row) {
    owner[0] = row;
    int col0 = 0;
    std::vector<long long> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(col0)] = true;
      const int r = owner[static_cast<std::size_t>(col0)];
      long long delta = inf;
      int col1 = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[static_cast<std::size_t>(c)]) continue;
        const long long cost = -static_cast<long long>(weights(r - 1, c - 1));
        const long long cur = cost - u[static_cast<std::size_t>(r)] - v[static_cast<std::size_t>(c)];
        if (cur < minv[static_cast<std::size_t>(c)]) {
          minv[static_cast<std::size_t>(c)] = cur;
          way[static_cast<std::size_t>(c)] = col0;
        }
        if (minv[static_cast<std::size_t>(c)] < delta) {
          delta = minv[static_cast<std::size_t>(c)];
          col1 = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[static_cast<std::size_t>(c)]) {
          u[static_cast<std::size_t>(owner[static_cast<std::size_t>(c)])] += delta;
          v[static_cast<std::size_t>(c)] -= delta;
        } else {
          minv[static_cast<std::size_t>(c)] -= delta;
        }
      }
      col0 = col1;
    } while (owner[static_cast<std::size_t>(col0)] != 0);
    do {
      const int col1 = way[static_cast<std::size_t>(col0)];
      owner[static_cast<std::size_t>(col0)] = owner[static_cast<std::size_t>(col1)];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int c = 1; c <= n; ++c) assignment[static_cast<std::size_t>(owner[static_cast<std::size_t>(c)] - 1)] = c - 1;
  return assignment;
}

Eigen::MatrixXi confusion_matrix(std::span<const int> pred, std::span<const int> gt, int classes) {
  if (pred.size() != gt.size()) throw ShapeError("prediction and ground-truth lengths differ");
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= classes || gt[i] < 0 || gt[i] >= classes)
      throw ShapeError("class index out of range at position " + std::to_string(i));
    ++m(pred[i], gt[i]);
  }
  return m;
}

Eigen::MatrixXi confusion_matrix(std::span<const int> pred, std::span<const int> gt, int classes,
                                 const std::vector<int>& permutation) {
  if (permutation.size() != static_cast<std::size_t>(classes)) throw ShapeError("permutation length differs from C");
  std::vector<int> mapped(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= classes) throw ShapeError("class index out of range at position " + std::to_string(i));
    mapped[i] = permutation[static_cast<std::size_t>(pred[i])];
  }
  return confusion_matrix(mapped, gt, classes);
}

AssignmentResult hungarian_accuracy(std::span<const int> pred, std::span<const int> gt, int classes) {
  if (pred.empty()) throw std::domain_error("accuracy is undefined for an empty sample");
  const Eigen::MatrixXi counts = confusion_matrix(pred, gt, classes);
  AssignmentResult r;
  r.permutation = max_weight_assignment(counts);
  r.total = pred.size();
  for (int p = 0; p < classes; ++p) r.matched += static_cast<std::size_t>(counts(p, r.permutation[static_cast<std::size_t>(p)]));
  r.accuracy = static_cast<double>(r.matched) / static_cast<double>(r.total);
  return r;
}

int calibration_bucket(double confidence, int buckets) {
  int m = static_cast<int>(std::ceil(confidence * buckets)) - 1;
  m = std::clamp(m, 0, buckets - 1);
  // Guard the product against rounding across a boundary.
  if (m > 0 && confidence <= static_cast<double>(m) / buckets) --m;
  if (m + 1 < buckets && confidence > static_cast<double>(m + 1) / buckets) ++m;
  return m;
}

CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct, int buckets) {
  if (confidences.empty()) throw std::domain_error("ECE is undefined for an empty sample");
  if (confidences.size() != correct.size()) throw ShapeError("confidence and correctness lengths differ");
  if (buckets < 1) throw ConfigError("need at least one bucket");
  CalibrationReport r;
  r.total = confidences.size();
  r.buckets.resize(static_cast<std::size_t>(buckets));
  std::vector<double> conf_sum(static_cast<std::size_t>(buckets), 0.0);
  std::vector<std::size_t> hits(static_cast<std::size_t>(buckets), 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("confidence outside [0, 1]");
    const auto m = static_cast<std::size_t>(calibration_bucket(c, buckets));
    ++r.buckets[m].count;
    conf_sum[m] += c;
    if (correct[i]) ++hits[m];
  }
  const auto n = static_cast<double>(r.total);
  for (std::size_t m = 0; m < r.buckets.size(); ++m) {
    auto& b = r.buckets[m];
    b.lower = static_cast<double>(m) / buckets;
    b.upper = static_cast<double>(m + 1) / buckets;
    if (b.count == 0) continue;
    b.mean_confidence = conf_sum[m] / static_cast<double>(b.count);
    b.accuracy = static_cast<double>(hits[m]) / static_cast<double>(b.count);
    r.ece += static_cast<double>(b.count) / n * std::abs(b.accuracy - b.mean_confidence);
  }
  return r;
}

SelectionQuality selection_quality(const Partition& partition, const PseudoLabeledDataset& dataset) {
  SelectionQuality q;
  const auto index = dataset.index_by_id();
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (argmax(dataset.pseudo_labels[i]) == dataset.samples[i].gt) ++q.recoverable;
  for (const auto& e : partition.clean) {
    auto it = index.find(e.id);
    if (it == index.end()) throw ShapeError("partition references unknown sample " + std::to_string(e.id));
    ++q.selected;
    if (argmax(e.label) == dataset.samples[it->second].gt) ++q.true_positives;
  }
  const auto tp = static_cast<double>(q.true_positives);
  if (q.selected == 0 || q.recoverable == 0) q.degenerate = true;
  q.precision = q.selected > 0 ? tp / static_cast<double>(q.selected) : 0.0;
  q.recall = q.recoverable > 0 ? tp / static_cast<double>(q.recoverable) : 0.0;
  if (q.precision + q.recall > 0.0)
    q.f1 = 2.0 * q.precision * q.recall / (q.precision + q.recall);
  else
    q.degenerate = true;
  return q;
}

nlohmann::json to_json(const AssignmentResult& a) {
  return {{"permutation", a.permutation}, {"matched", a.matched}, {"total", a.total}, {"accuracy", a.accuracy}};
}

nlohmann::json to_json(const CalibrationReport& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : r.buckets)
    buckets.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count},
                       {"mean_confidence", b.mean_confidence}, {"accuracy", b.accuracy}});
  return {{"ece", r.ece}, {"total", r.total}, {"buckets", buckets}};
}

nlohmann::json to_json(const SelectionQuality& q) {
  return {{"precision", q.precision}, {"recall", q.recall}, {"f1", q.f1},
          {"true_positives", q.true_positives}, {"selected", q.selected},
          {"recoverable", q.recoverable}, {"degenerate", q.degenerate}};
}

nlohmann::json to_json(const Eigen::MatrixXi& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<int> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ruc
