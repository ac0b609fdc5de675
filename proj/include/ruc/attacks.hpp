#pragma once

#include "ruc/network.hpp"
#include "ruc/synthdata.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ruc {

enum class AttackKind { fgsm, bim };
/// Which label the attack loss is taken against.
enum class AttackLabel { prediction, ground_truth };

const char* to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);
AttackLabel parse_attack_label(const std::string& s);
const char* to_string(AttackLabel l);

struct AttackConfig {
  AttackKind kind = AttackKind::fgsm;
  double epsilon = 0.1;
  int iterations = 5;
  /// BIM step; defaults to epsilon / iterations.
  std::optional<double> step;
  AttackLabel label = AttackLabel::prediction;

  void validate() const;
  double step_size() const { return step.value_or(epsilon / iterations); }
};

/// x + eps * sign(grad_x H(y, f(x))), sign(0) = 0.
FeatureVector fgsm(const ClassifierNet& net, const FeatureVector& x, const ProbVector& y, double epsilon);
Eigen::MatrixXd fgsm_batch(const ClassifierNet& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, double epsilon);

/// Iterated sign steps, each clipped back into the l-inf ball of radius
/// epsilon around x.
FeatureVector bim(const ClassifierNet& net, const FeatureVector& x, const ProbVector& y, const AttackConfig& cfg);
Eigen::MatrixXd bim_batch(const ClassifierNet& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, const AttackConfig& cfg);

/// Hungarian accuracy on perturbed copies of every sample, one entry per
/// epsilon. cfg.epsilon is ignored.
std::vector<double> robustness_curve(const ClassifierNet& net, const PseudoLabeledDataset& dataset,
                                     const std::vector<double>& epsilons, const AttackConfig& cfg);

}  // namespace ruc
