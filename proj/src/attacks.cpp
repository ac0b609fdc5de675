#include "ruc/attacks.hpp"

#include "ruc/metrics.hpp"

namespace ruc {

const char* to_string(AttackKind k) { return k == AttackKind::fgsm ? "fgsm" : "bim"; }

AttackKind parse_attack_kind(const std::string& s) {
  if (s == "fgsm") return AttackKind::fgsm;
  if (s == "bim") return AttackKind::bim;
  throw ConfigError("unknown attack kind '" + s + "'");
}

const char* to_string(AttackLabel l) { return l == AttackLabel::prediction ? "prediction" : "ground_truth"; }

AttackLabel parse_attack_label(const std::string& s) {
  if (s == "prediction") return AttackLabel::prediction;
  if (s == "ground_truth" || s == "gt") return AttackLabel::ground_truth;
  throw ConfigError("unknown attack label mode '" + s + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be non-negative");
  if (iterations < 1) throw ConfigError("attack iterations must be at least 1");
  if (step && !(*step >= 0.0)) throw ConfigError("attack step must be non-negative");
}

Eigen::MatrixXd fgsm_batch(const ClassifierNet& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, double epsilon) {
  if (epsilon == 0.0) return inputs;
  return inputs + epsilon * input_gradients(net, inputs, targets).cwiseSign();
}

FeatureVector fgsm(const ClassifierNet& net, const FeatureVector& x, const ProbVector& y, double epsilon) {
  return fgsm_batch(net, x, y, epsilon).col(0);
}

Eigen::MatrixXd bim_batch(const ClassifierNet& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, const AttackConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd lower = inputs.array() - cfg.epsilon;
  const Eigen::MatrixXd upper = inputs.array() + cfg.epsilon;
  const double step = cfg.step_size();
  Eigen::MatrixXd adv = inputs;
  for (int i = 0; i < cfg.iterations; ++i) {
    Eigen::MatrixXd moved = adv + step * input_gradients(net, adv, targets).cwiseSign();
    adv = moved.cwiseMax(lower).cwiseMin(upper);
  }
  return adv;
}

FeatureVector bim(const ClassifierNet& net, const FeatureVector& x, const ProbVector& y, const AttackConfig& cfg) {
  return bim_batch(net, x, y, cfg).col(0);
}

namespace {

std::vector<int> predict(const ClassifierNet& net, const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd p = net.forward_batch(inputs);
  std::vector<int> out(static_cast<std::size_t>(p.cols()));
  for (Eigen::Index j = 0; j < p.cols(); ++j) out[static_cast<std::size_t>(j)] = argmax(p.col(j));
  return out;
}

}  // namespace

std::vector<double> robustness_curve(const ClassifierNet& net, const PseudoLabeledDataset& dataset,
                                     const std::vector<double>& epsilons, const AttackConfig& cfg) {
  const Eigen::MatrixXd inputs = dataset.feature_matrix();
  const auto gt = dataset.ground_truth();
  const auto clean_pred = predict(net, inputs);
  const int classes = net.classes();

  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(classes, inputs.cols());
  if (cfg.label == AttackLabel::prediction) {
    for (std::size_t j = 0; j < clean_pred.size(); ++j) targets(clean_pred[j], static_cast<Eigen::Index>(j)) = 1.0;
  } else {
    // Ground truth lives in the dataset's class space; map it into the
    // network's through the inverse of the clean assignment.
    const auto perm = hungarian_accuracy(clean_pred, gt, classes).permutation;
    std::vector<int> inverse(perm.size());
    for (std::size_t p = 0; p < perm.size(); ++p) inverse[static_cast<std::size_t>(perm[p])] = static_cast<int>(p);
    for (std::size_t j = 0; j < gt.size(); ++j)
      targets(inverse[static_cast<std::size_t>(gt[j])], static_cast<Eigen::Index>(j)) = 1.0;
  }

  std::vector<double> curve;
  curve.reserve(epsilons.size());
  for (double eps : epsilons) {
    AttackConfig c = cfg;
    c.epsilon = eps;
    c.validate();
    const Eigen::MatrixXd adv = c.kind == AttackKind::fgsm ? fgsm_batch(net, inputs, targets, eps)
                                                           : bim_batch(net, inputs, targets, c);
    curve.push_back(hungarian_accuracy(predict(net, adv), gt, classes).accuracy);
  }
  return curve;
}

}  // namespace ruc
