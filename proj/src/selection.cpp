#include "ruc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace ruc {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::confidence: return "confidence";
    case Strategy::metric: return "metric";
    case Strategy::hybrid: return "hybrid";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "confidence") return Strategy::confidence;
  if (s == "metric") return Strategy::metric;
  if (s == "hybrid") return Strategy::hybrid;
  throw ConfigError("unknown selection strategy '" + s + "'");
}

std::vector<SampleId> Partition::clean_ids() const {
  std::vector<SampleId> ids;
  ids.reserve(clean.size());
  for (const auto& e : clean) ids.push_back(e.id);
  return ids;
}

bool Partition::covers(const PseudoLabeledDataset& dataset) const {
  if (clean.size() + unclean.size() != dataset.size()) return false;
  const auto index = dataset.index_by_id();
  std::unordered_set<SampleId> seen;
  for (const auto& e : clean) {
    if (!index.contains(e.id) || !seen.insert(e.id).second) return false;
    if (e.label.size() != dataset.classes || !is_prob_vector(e.label)) return false;
  }
  for (auto id : unclean)
    if (!index.contains(id) || !seen.insert(id).second) return false;
  return seen.size() == dataset.size();
}

void SelectionConfig::validate(int classes) const {
  if (!(tau1 > 1.0 / classes && tau1 <= 1.0)) throw ConfigError("tau1 must lie in (1/C, 1]");
  if (k < 1) throw ConfigError("k must be at least 1");
}

namespace {

void require_labels(const PseudoLabeledDataset& ds) {
  if (ds.pseudo_labels.size() != ds.samples.size())
    throw ConfigError("dataset has no pseudo-labels to select from");
}

Partition from_mask(const PseudoLabeledDataset& ds, const std::vector<bool>& clean, Strategy tag) {
  Partition p;
  p.strategy = tag;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (clean[i])
      p.clean.push_back({ds.samples[i].id, ds.pseudo_labels[i]});
    else
      p.unclean.push_back(ds.samples[i].id);
  }
  return p;
}

std::vector<bool> confidence_mask(const PseudoLabeledDataset& ds, double tau1) {
  std::vector<bool> mask(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) mask[i] = ds.pseudo_labels[i].maxCoeff() > tau1;
  return mask;
}

std::vector<bool> metric_mask(const PseudoLabeledDataset& ds, const EmbeddingProvider& provider, int k) {
  const auto n = static_cast<int>(ds.size());
  if (k < 1) throw ConfigError("k must be at least 1");
  if (k >= n) throw ConfigError("k must be smaller than the dataset size");
  std::vector<SampleId> ids;
  ids.reserve(ds.size());
  for (const auto& s : ds.samples) ids.push_back(s.id);
  const auto own = ds.pseudo_classes();
  const auto winner = knn_vote(provider.embed_batch(ds.feature_matrix()), ids, own, ds.classes, k);
  std::vector<bool> mask(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) mask[i] = winner[i] == own[i];
  return mask;
}

}  // namespace

std::vector<int> knn_vote(const Eigen::MatrixXd& emb, const std::vector<SampleId>& ids,
                          const std::vector<int>& votes, int classes, int k) {
  const auto n = emb.cols();
  std::vector<int> winner(static_cast<std::size_t>(n), -1);
  std::vector<std::pair<double, SampleId>> cand;
  std::vector<std::size_t> order;
  std::vector<int> count(static_cast<std::size_t>(classes));
  std::unordered_map<SampleId, std::size_t> pos;
  for (Eigen::Index j = 0; j < n; ++j) pos.emplace(ids[static_cast<std::size_t>(j)], static_cast<std::size_t>(j));

  for (Eigen::Index i = 0; i < n; ++i) {
    cand.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back((emb.col(j) - emb.col(i)).squaredNorm(), ids[static_cast<std::size_t>(j)]);
    }
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    std::fill(count.begin(), count.end(), 0);
    for (int r = 0; r < k; ++r) ++count[static_cast<std::size_t>(votes[pos[cand[static_cast<std::size_t>(r)].second]])];
    int best = 0;
    bool tied = false;
    for (int c = 1; c < classes; ++c) {
      if (count[static_cast<std::size_t>(c)] > count[static_cast<std::size_t>(best)]) {
        best = c;
        tied = false;
      } else if (count[static_cast<std::size_t>(c)] == count[static_cast<std::size_t>(best)]) {
        tied = true;
      }
    }
    winner[static_cast<std::size_t>(i)] = tied ? -1 : best;
  }
  return winner;
}

Partition select_confidence(const PseudoLabeledDataset& dataset, double tau1) {
  require_labels(dataset);
  return from_mask(dataset, confidence_mask(dataset, tau1), Strategy::confidence);
}

Partition select_metric(const PseudoLabeledDataset& dataset, const EmbeddingProvider& provider, int k) {
  require_labels(dataset);
  return from_mask(dataset, metric_mask(dataset, provider, k), Strategy::metric);
}

Partition select_hybrid(const PseudoLabeledDataset& dataset, double tau1,
                        const EmbeddingProvider& provider, int k) {
  require_labels(dataset);
  auto mask = confidence_mask(dataset, tau1);
  const auto metric = metric_mask(dataset, provider, k);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && metric[i];
  return from_mask(dataset, mask, Strategy::hybrid);
}

Partition select(const PseudoLabeledDataset& dataset, const SelectionConfig& cfg,
                 const EmbeddingProvider& provider) {
  cfg.validate(dataset.classes);
  switch (cfg.strategy) {
    case Strategy::confidence: return select_confidence(dataset, cfg.tau1);
    case Strategy::metric: return select_metric(dataset, provider, cfg.k);
    case Strategy::hybrid: return select_hybrid(dataset, cfg.tau1, provider, cfg.k);
  }
  throw ConfigError("unknown strategy");
}

double tau2_at(int epoch, const Tau2Schedule& s) {
  if (epoch < 0) throw ConfigError("epoch must be non-negative");
  if (s.every < 1) throw ConfigError("tau2 schedule period must be positive");
  return std::min(s.start + s.step * static_cast<double>(epoch / s.every), s.cap);
}

std::string format_partition(const Partition& partition, const PseudoLabeledDataset& dataset) {
  std::unordered_map<SampleId, const ProbVector*> clean;
  for (const auto& e : partition.clean) clean.emplace(e.id, &e.label);
  std::string out;
  char buf[40];
  for (const auto& s : dataset.samples) {
    out += std::to_string(s.id);
    auto it = clean.find(s.id);
    if (it == clean.end()) {
      out += " unclean\n";
      continue;
    }
    out += " clean";
    for (Eigen::Index c = 0; c < it->second->size(); ++c) {
      const int len = std::snprintf(buf, sizeof buf, " %.17g", (*it->second)[c]);
      out.append(buf, static_cast<std::size_t>(len));
    }
    out += '\n';
  }
  return out;
}

void save_partition(const Partition& partition, const PseudoLabeledDataset& dataset,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_partition(partition, dataset);
}

}  // namespace ruc
