#pragma once

#include "ruc/augment.hpp"
#include "ruc/metrics.hpp"
#include "ruc/network.hpp"
#include "ruc/selection.hpp"
#include "ruc/synthdata.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ruc {

enum class SmoothingMode { fixed, per_sample_uniform };

const char* to_string(SmoothingMode m);
SmoothingMode parse_smoothing_mode(const std::string& s);

struct TrainConfig {
  SelectionConfig selection;
  /// Label-smoothing weight epsilon.
  double smoothing = 0.5;
  SmoothingMode smoothing_mode = SmoothingMode::fixed;
  /// Weak views per unlabeled sample (M).
  int augmentations = 2;
  double lambda_u = 25.0;
  /// lambda_u grows linearly from 0 over this many epochs (fractional per
  /// batch); 0 applies the full weight from the start.
  double lambda_u_rampup = 16.0;
  int batch_size = 64;
  int epochs = 50;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Tau2Schedule tau2;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64};
  Activation activation = Activation::relu;
  /// Jitter strengths, MixUp alpha and sharpening temperature.
  AugmentConfig augment;
  /// Two networks with co-refinement and ensemble guessing; false trains a
  /// single network whose refinement weight is pinned to 0.
  bool co_training = true;
  /// false pins lambda' = 1 in MixMatch.
  bool mixup = true;
  bool refurbish = true;
  int ece_bins = 15;

  void validate() const;
};

/// (1 - eps) y + eps / (C - 1) (1 - y).
ProbVector smooth_label(const ProbVector& y, double epsilon, int classes);

/// sharpen((1 - w) y + w f_counter(x), T).
ProbVector co_refine_labeled(const FeatureVector& x, const ProbVector& y, const ClassifierNet& counter,
                             double w, double temperature);

/// Min-max normalisation of the counter network's confidences over a batch;
/// a batch of identical confidences maps to 0.5.
std::vector<double> minmax_weights(std::span<const double> confidences);

/// Averages every network's prediction over the given views (one D x N
/// matrix per view, same columns in each) and sharpens. Returns C x N.
Eigen::MatrixXd guess_labels(std::span<const Eigen::MatrixXd> views,
                             std::span<const ClassifierNet* const> nets, double temperature);

/// Draws M weak views of u and returns the sharpened ensemble guess. Pass
/// net2 = nullptr for a single network.
ProbVector guess_unlabeled(const FeatureVector& u, const ClassifierNet& net1, const ClassifierNet* net2,
                           int augmentations, double temperature, const AugmentConfig& cfg, Rng& rng);

/// Columns of inputs paired with columns of labels.
struct LabeledBatch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd labels;

  Eigen::Index size() const { return inputs.cols(); }
};

struct MixMatchResult {
  LabeledBatch labeled;
  LabeledBatch unlabeled;
  /// Set when the labeled input was empty; only the unlabeled loss applies.
  bool skipped_labeled = false;
};

/// W = shuffle(Xbar ++ Ubar); Xhat_i = mixup(Xbar_i, W_i),
/// Uhat_j = mixup(Ubar_j, W_{|Xbar|+j}). With mix = false lambda' = 1.
MixMatchResult mixmatch(const LabeledBatch& xbar, const LabeledBatch& ubar, double alpha, Rng& rng,
                        bool mix = true);

/// Mean H(y_hat, f(x_hat)).
double loss_labeled(const LabeledBatch& xhat, const ClassifierNet& net);
/// Mean ||q_hat - f(u_hat)||^2.
double loss_unlabeled(const LabeledBatch& uhat, const ClassifierNet& net);

/// Strongly augmented inputs paired with smoothed labels.
LabeledBatch strong_batch(const LabeledBatch& clean, double epsilon, const AugmentConfig& cfg, Rng& rng);
/// Mean H(smooth(y), f(strong_aug(x))).
double loss_strong(const LabeledBatch& clean, const ClassifierNet& net, double epsilon,
                   const AugmentConfig& cfg, Rng& rng);

/// L_{X^s} + L_{X_hat} + lambda_u L_{U_hat} as a differentiable spec.
LossSpec total_loss_spec(const LabeledBatch& strong, const LabeledBatch& xhat, const LabeledBatch& uhat,
                         double lambda_u);
double total_loss(const LabeledBatch& strong, const LabeledBatch& xhat, const LabeledBatch& uhat,
                  const ClassifierNet& net, double lambda_u);

struct RefurbishResult {
  std::vector<CleanEntry> promoted;
  std::vector<SampleId> remaining;
};

/// For each unclean sample take the network with the highest max
/// confidence; promote with a onehot label when that confidence > tau2.
RefurbishResult co_refurbish(const std::vector<SampleId>& unclean, const PseudoLabeledDataset& dataset,
                             std::span<const ClassifierNet* const> nets, double tau2);

struct Evaluation {
  AssignmentResult assignment;
  CalibrationReport calibration;
  std::vector<int> predictions;
  std::vector<double> confidences;
};

/// Hungarian accuracy and ECE of `net` on every sample; correctness is
/// judged after the best class bijection.
Evaluation evaluate(const ClassifierNet& net, const PseudoLabeledDataset& dataset, int ece_bins);

struct EpochMetrics {
  int epoch = 0;
  double acc_net1 = 0.0;
  double acc_net2 = 0.0;
  double ece_net1 = 0.0;
  double ece_net2 = 0.0;
  std::size_t clean_size = 0;
  double tau2 = 0.0;
  double loss_total = 0.0;
};

std::string metric_log_csv(const std::vector<EpochMetrics>& log);

struct CoTrainState {
  ClassifierNet net1;
  ClassifierNet net2;
  OptimizerState opt1;
  OptimizerState opt2;
  Partition partition;
  int epoch = 0;
  std::vector<EpochMetrics> log;
};

/// Loss became non-finite during training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Unlabeled weight in effect at fractional epoch `progress`.
double lambda_u_at(double progress, const TrainConfig& cfg);

/// Seed used to initialise network k (1 or 2); the baseline shares net 1's.
std::uint64_t network_seed(const TrainConfig& cfg, int k);

/// Fresh networks (or copies of `warm_start` with a redrawn final layer),
/// the initial partition and the epoch-0 log row.
CoTrainState init_ruc(const PseudoLabeledDataset& dataset, const TrainConfig& cfg,
                      const EmbeddingProvider& provider,
                      const std::optional<ClassifierNet>& warm_start = std::nullopt);

/// One pass of the retraining loop: each network in turn over every batch,
/// then co-refurbishing and a log row.
void run_epoch(CoTrainState& state, const PseudoLabeledDataset& dataset, const TrainConfig& cfg);

CoTrainState run_ruc(const PseudoLabeledDataset& dataset, const TrainConfig& cfg,
                     const EmbeddingProvider& provider,
                     const std::optional<ClassifierNet>& warm_start = std::nullopt);

/// Labeled and unlabeled index lists of one mini-batch.
struct BatchIndices {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Both sets shuffled; the shorter one is topped up by sampling with
/// replacement so both yield the same number of batches.
std::vector<BatchIndices> plan_batches(std::size_t n_labeled, std::size_t n_unlabeled, int batch_size, Rng& rng);

/// One epoch of plain cross-entropy on (inputs, targets) with the batch
/// order drawn from `batch_rng`; the batch loss is scaled by loss_scale.
/// Returns the mean batch loss.
double supervised_epoch(ClassifierNet& net, OptimizerState& opt, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, int batch_size, Rng& batch_rng,
                        double loss_scale = 1.0);

struct BaselineResult {
  ClassifierNet net;
  std::vector<EpochMetrics> log;
};

/// ERM comparator: one network, cross-entropy on every raw pseudo-label.
BaselineResult train_baseline(const PseudoLabeledDataset& dataset, const TrainConfig& cfg);

}  // namespace ruc
