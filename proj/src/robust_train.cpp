#include "ruc/robust_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <unordered_map>

namespace ruc {

const char* to_string(SmoothingMode m) { return m == SmoothingMode::fixed ? "fixed" : "uniform"; }

SmoothingMode parse_smoothing_mode(const std::string& s) {
  if (s == "fixed") return SmoothingMode::fixed;
  if (s == "uniform" || s == "per_sample_uniform") return SmoothingMode::per_sample_uniform;
  throw ConfigError("unknown smoothing mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("smoothing epsilon must lie in [0, 1)");
  if (!(lambda_u >= 0.0)) throw ConfigError("lambda_u must be non-negative");
  if (!(lambda_u_rampup >= 0.0)) throw ConfigError("lambda_u ramp-up must be non-negative");
  if (augmentations < 1) throw ConfigError("need at least one weak augmentation (M >= 1)");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (tau2.every < 1) throw ConfigError("tau2 period must be positive");
  if (ece_bins < 1) throw ConfigError("need at least one ECE bucket");
  for (int w : hidden)
    if (w < 1) throw ConfigError("hidden widths must be positive");
  augment.validate();
}

ProbVector smooth_label(const ProbVector& y, double epsilon, int classes) {
  if (classes < 2) throw ConfigError("label smoothing needs C >= 2");
  if (y.size() != classes) throw ShapeError("label length differs from C");
  return (1.0 - epsilon) * y + (epsilon / (classes - 1)) * (ProbVector::Ones(classes) - y);
}

ProbVector co_refine_labeled(const FeatureVector& x, const ProbVector& y, const ClassifierNet& counter,
                             double w, double temperature) {
  return sharpen((1.0 - w) * y + w * counter.forward(x), temperature);
}

std::vector<double> minmax_weights(std::span<const double> confidences) {
  std::vector<double> w(confidences.size(), 0.5);
  if (confidences.empty()) return w;
  const auto [lo, hi] = std::minmax_element(confidences.begin(), confidences.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return w;
  for (std::size_t i = 0; i < confidences.size(); ++i) w[i] = (confidences[i] - *lo) / range;
  return w;
}

Eigen::MatrixXd guess_labels(std::span<const Eigen::MatrixXd> views,
                             std::span<const ClassifierNet* const> nets, double temperature) {
  if (views.empty() || nets.empty()) throw ConfigError("label guessing needs at least one view and one network");
  const Eigen::Index n = views.front().cols();
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(nets.front()->classes(), n);
  for (const auto& v : views)
    for (const auto* net : nets) avg += net->forward_batch(v);
  avg /= static_cast<double>(views.size() * nets.size());
  for (Eigen::Index j = 0; j < n; ++j) avg.col(j) = sharpen(avg.col(j), temperature);
  return avg;
}

ProbVector guess_unlabeled(const FeatureVector& u, const ClassifierNet& net1, const ClassifierNet* net2,
                           int augmentations, double temperature, const AugmentConfig& cfg, Rng& rng) {
  if (augmentations < 1) throw ConfigError("need at least one weak augmentation (M >= 1)");
  std::vector<Eigen::MatrixXd> views;
  for (int m = 0; m < augmentations; ++m) views.emplace_back(weak_aug(u, cfg, rng));
  std::vector<const ClassifierNet*> nets{&net1};
  if (net2 != nullptr) nets.push_back(net2);
  return guess_labels(views, nets, temperature).col(0);
}

MixMatchResult mixmatch(const LabeledBatch& xbar, const LabeledBatch& ubar, double alpha, Rng& rng, bool mix) {
  const Eigen::Index nx = xbar.size();
  const Eigen::Index nu = ubar.size();
  MixMatchResult out;
  out.skipped_labeled = nx == 0;
  if (nx + nu == 0) return out;
  const Eigen::Index dim = nx > 0 ? xbar.inputs.rows() : ubar.inputs.rows();
  const Eigen::Index classes = nx > 0 ? xbar.labels.rows() : ubar.labels.rows();
  if (nx > 0 && nu > 0 && (xbar.inputs.rows() != ubar.inputs.rows() || xbar.labels.rows() != ubar.labels.rows()))
    throw ShapeError("labeled and unlabeled batches differ in shape");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(nx + nu));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto w_input = [&](Eigen::Index k) {
    return k < nx ? xbar.inputs.col(k) : ubar.inputs.col(k - nx);
  };
  auto w_label = [&](Eigen::Index k) {
    return k < nx ? xbar.labels.col(k) : ubar.labels.col(k - nx);
  };
  auto mix_into = [&](const LabeledBatch& src, Eigen::Index offset, LabeledBatch& dst) {
    dst.inputs.resize(dim, src.size());
    dst.labels.resize(classes, src.size());
    for (Eigen::Index i = 0; i < src.size(); ++i) {
      const Eigen::Index partner = order[static_cast<std::size_t>(offset + i)];
      const double lambda = mix ? sample_symmetric_beta(alpha, rng) : 1.0;
      auto m = mixup_with_lambda(src.inputs.col(i), src.labels.col(i), w_input(partner), w_label(partner), lambda);
      dst.inputs.col(i) = m.x;
      dst.labels.col(i) = m.y;
    }
  };
  mix_into(xbar, 0, out.labeled);
  mix_into(ubar, nx, out.unlabeled);
  return out;
}

double loss_labeled(const LabeledBatch& xhat, const ClassifierNet& net) {
  return evaluate_loss(net, {LossTerm{LossKind::cross_entropy, xhat.inputs, xhat.labels, 1.0}});
}

double loss_unlabeled(const LabeledBatch& uhat, const ClassifierNet& net) {
  return evaluate_loss(net, {LossTerm{LossKind::squared_error, uhat.inputs, uhat.labels, 1.0}});
}

LabeledBatch strong_batch(const LabeledBatch& clean, double epsilon, const AugmentConfig& cfg, Rng& rng) {
  LabeledBatch out{Eigen::MatrixXd(clean.inputs.rows(), clean.size()),
                   Eigen::MatrixXd(clean.labels.rows(), clean.size())};
  const auto classes = static_cast<int>(clean.labels.rows());
  for (Eigen::Index j = 0; j < clean.size(); ++j) {
    out.inputs.col(j) = strong_aug(clean.inputs.col(j), cfg, rng);
    out.labels.col(j) = smooth_label(clean.labels.col(j), epsilon, classes);
  }
  return out;
}

double loss_strong(const LabeledBatch& clean, const ClassifierNet& net, double epsilon,
                   const AugmentConfig& cfg, Rng& rng) {
  const LabeledBatch s = strong_batch(clean, epsilon, cfg, rng);
  return evaluate_loss(net, {LossTerm{LossKind::cross_entropy, s.inputs, s.labels, 1.0}});
}

LossSpec total_loss_spec(const LabeledBatch& strong, const LabeledBatch& xhat, const LabeledBatch& uhat,
                         double lambda_u) {
  LossSpec spec;
  spec.push_back({LossKind::cross_entropy, strong.inputs, strong.labels, 1.0});
  spec.push_back({LossKind::cross_entropy, xhat.inputs, xhat.labels, 1.0});
  if (lambda_u > 0.0) spec.push_back({LossKind::squared_error, uhat.inputs, uhat.labels, lambda_u});
  return spec;
}

double total_loss(const LabeledBatch& strong, const LabeledBatch& xhat, const LabeledBatch& uhat,
                  const ClassifierNet& net, double lambda_u) {
  return evaluate_loss(net, total_loss_spec(strong, xhat, uhat, lambda_u));
}

RefurbishResult co_refurbish(const std::vector<SampleId>& unclean, const PseudoLabeledDataset& dataset,
                             std::span<const ClassifierNet* const> nets, double tau2) {
  if (nets.empty()) throw ConfigError("refurbishing needs at least one network");
  RefurbishResult out;
  if (unclean.empty()) return out;
  const auto index = dataset.index_by_id();
  Eigen::MatrixXd inputs(dataset.dim, static_cast<Eigen::Index>(unclean.size()));
  for (std::size_t j = 0; j < unclean.size(); ++j)
    inputs.col(static_cast<Eigen::Index>(j)) = dataset.samples[index.at(unclean[j])].x;
  std::vector<Eigen::MatrixXd> probs;
  for (const auto* net : nets) probs.push_back(net->forward_batch(inputs));
  for (std::size_t j = 0; j < unclean.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k].col(col).maxCoeff() > probs[best].col(col).maxCoeff()) best = k;
    const Eigen::VectorXd p = probs[best].col(col);
    if (p.maxCoeff() > tau2)
      out.promoted.push_back({unclean[j], onehot(argmax(p), static_cast<int>(p.size()))});
    else
      out.remaining.push_back(unclean[j]);
  }
  return out;
}

Evaluation evaluate(const ClassifierNet& net, const PseudoLabeledDataset& dataset, int ece_bins) {
  Evaluation ev;
  const Eigen::MatrixXd probs = net.forward_batch(dataset.feature_matrix());
  ev.predictions.resize(static_cast<std::size_t>(probs.cols()));
  ev.confidences.resize(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    ev.predictions[static_cast<std::size_t>(j)] = argmax(probs.col(j));
    ev.confidences[static_cast<std::size_t>(j)] = std::clamp(probs.col(j).maxCoeff(), 0.0, 1.0);
  }
  const auto gt = dataset.ground_truth();
  ev.assignment = hungarian_accuracy(ev.predictions, gt, dataset.classes);
  std::vector<bool> correct(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i)
    correct[i] = ev.assignment.permutation[static_cast<std::size_t>(ev.predictions[i])] == gt[i];
  ev.calibration = ece(ev.confidences, correct, ece_bins);
  return ev;
}

std::string metric_log_csv(const std::vector<EpochMetrics>& log) {
  std::string out = "epoch,acc_net1,acc_net2,ece_net1,ece_net2,clean_size,tau2,loss_total\n";
  char buf[256];
  for (const auto& m : log) {
    const int len = std::snprintf(buf, sizeof buf, "%d,%.10f,%.10f,%.10f,%.10f,%zu,%.4f,%.10f\n", m.epoch,
                                  m.acc_net1, m.acc_net2, m.ece_net1, m.ece_net2, m.clean_size, m.tau2,
                                  m.loss_total);
    out.append(buf, static_cast<std::size_t>(len));
  }
  return out;
}

std::vector<BatchIndices> plan_batches(std::size_t n_labeled, std::size_t n_unlabeled, int batch_size, Rng& rng) {
  const std::size_t longest = std::max(n_labeled, n_unlabeled);
  const auto b = static_cast<std::size_t>(batch_size);
  auto order_for = [&](std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    if (n > 0 && n < longest) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      while (order.size() < longest) order.push_back(pick(rng));
    }
    return order;
  };
  const auto lab = order_for(n_labeled);
  const auto unl = order_for(n_unlabeled);
  std::vector<BatchIndices> batches;
  for (std::size_t start = 0; start < longest; start += b) {
    const std::size_t stop = std::min(start + b, longest);
    BatchIndices bi;
    if (!lab.empty()) bi.labeled.assign(lab.begin() + static_cast<std::ptrdiff_t>(start), lab.begin() + static_cast<std::ptrdiff_t>(stop));
    if (!unl.empty()) bi.unlabeled.assign(unl.begin() + static_cast<std::ptrdiff_t>(start), unl.begin() + static_cast<std::ptrdiff_t>(stop));
    batches.push_back(std::move(bi));
  }
  return batches;
}

double supervised_epoch(ClassifierNet& net, OptimizerState& opt, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, int batch_size, Rng& batch_rng, double loss_scale) {
  const auto batches = plan_batches(static_cast<std::size_t>(inputs.cols()), 0, batch_size, batch_rng);
  double total = 0.0;
  for (const auto& b : batches) {
    LossTerm term{LossKind::cross_entropy, Eigen::MatrixXd(inputs.rows(), static_cast<Eigen::Index>(b.labeled.size())),
                  Eigen::MatrixXd(targets.rows(), static_cast<Eigen::Index>(b.labeled.size())), loss_scale};
    for (std::size_t j = 0; j < b.labeled.size(); ++j) {
      term.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(b.labeled[j]));
      term.targets.col(static_cast<Eigen::Index>(j)) = targets.col(static_cast<Eigen::Index>(b.labeled[j]));
    }
    auto lg = loss_and_gradients(net, {std::move(term)});
    total += lg.loss;
    sgd_step(net, opt, lg.gradients);
  }
  return batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
}

double lambda_u_at(double progress, const TrainConfig& cfg) {
  if (cfg.lambda_u_rampup <= 0.0) return cfg.lambda_u;
  return cfg.lambda_u * std::clamp(progress / cfg.lambda_u_rampup, 0.0, 1.0);
}

std::uint64_t network_seed(const TrainConfig& cfg, int k) {
  return derive_seed(cfg.seed, {kStreamInit, static_cast<std::uint64_t>(100 + k)});
}

namespace {

EpochMetrics evaluate_pair(const CoTrainState& s, const PseudoLabeledDataset& ds, const TrainConfig& cfg,
                           int epoch, double tau2, double loss) {
  EpochMetrics m;
  m.epoch = epoch;
  const auto e1 = evaluate(s.net1, ds, cfg.ece_bins);
  m.acc_net1 = e1.assignment.accuracy;
  m.ece_net1 = e1.calibration.ece;
  if (cfg.co_training) {
    const auto e2 = evaluate(s.net2, ds, cfg.ece_bins);
    m.acc_net2 = e2.assignment.accuracy;
    m.ece_net2 = e2.calibration.ece;
  } else {
    m.acc_net2 = m.acc_net1;
    m.ece_net2 = m.ece_net1;
  }
  m.clean_size = s.partition.clean.size();
  m.tau2 = tau2;
  m.loss_total = loss;
  return m;
}

// One mini-batch update of `net` (network k), with `counter` the other
// network or nullptr when co-training is off.
double train_batch(ClassifierNet& net, OptimizerState& opt, const ClassifierNet* counter,
                   const BatchIndices& batch, const std::vector<std::size_t>& clean_rows,
                   const std::vector<const ProbVector*>& clean_labels,
                   const std::vector<std::size_t>& unclean_rows, const PseudoLabeledDataset& ds,
                   const TrainConfig& cfg, double lambda_u, Rng& aug_rng, Rng& smooth_rng, Rng& mix_rng) {
  const int classes = ds.classes;
  const int dim = ds.dim;
  const auto nx = static_cast<Eigen::Index>(batch.labeled.size());
  const auto nu = static_cast<Eigen::Index>(batch.unlabeled.size());
  const int views = cfg.augmentations;
  const auto& aug = cfg.augment;
  const double temperature = aug.temperature;

  LabeledBatch clean{Eigen::MatrixXd(dim, nx), Eigen::MatrixXd(classes, nx)};
  for (Eigen::Index j = 0; j < nx; ++j) {
    const auto slot = batch.labeled[static_cast<std::size_t>(j)];
    clean.inputs.col(j) = ds.samples[clean_rows[slot]].x;
    clean.labels.col(j) = *clean_labels[slot];
  }
  Eigen::MatrixXd unl(dim, nu);
  for (Eigen::Index j = 0; j < nu; ++j)
    unl.col(j) = ds.samples[unclean_rows[batch.unlabeled[static_cast<std::size_t>(j)]]].x;

  // Smoothed labels for the strong-view loss.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabeledBatch strong{Eigen::MatrixXd(dim, nx), Eigen::MatrixXd(classes, nx)};
  for (Eigen::Index j = 0; j < nx; ++j) {
    const double eps = cfg.smoothing_mode == SmoothingMode::fixed ? cfg.smoothing : unit(smooth_rng);
    strong.labels.col(j) = smooth_label(clean.labels.col(j), eps, classes);
  }

  // M weak views of every labeled and unlabeled sample.
  std::vector<Eigen::MatrixXd> xviews(static_cast<std::size_t>(views), Eigen::MatrixXd(dim, nx));
  std::vector<Eigen::MatrixXd> uviews(static_cast<std::size_t>(views), Eigen::MatrixXd(dim, nu));
  for (int m = 0; m < views; ++m) {
    for (Eigen::Index j = 0; j < nx; ++j) xviews[static_cast<std::size_t>(m)].col(j) = weak_aug(clean.inputs.col(j), aug, aug_rng);
    for (Eigen::Index j = 0; j < nu; ++j) uviews[static_cast<std::size_t>(m)].col(j) = weak_aug(unl.col(j), aug, aug_rng);
  }

  // Co-refined labels from the counter network.
  LabeledBatch xbar{xviews.front(), Eigen::MatrixXd(classes, nx)};
  if (counter != nullptr && nx > 0) {
    const Eigen::MatrixXd pc = counter->forward_batch(clean.inputs);
    std::vector<double> conf(static_cast<std::size_t>(nx));
    for (Eigen::Index j = 0; j < nx; ++j) conf[static_cast<std::size_t>(j)] = pc.col(j).maxCoeff();
    const auto w = minmax_weights(conf);
    for (Eigen::Index j = 0; j < nx; ++j) {
      const double wj = w[static_cast<std::size_t>(j)];
      xbar.labels.col(j) = sharpen((1.0 - wj) * clean.labels.col(j) + wj * pc.col(j), temperature);
    }
  } else {
    for (Eigen::Index j = 0; j < nx; ++j) xbar.labels.col(j) = sharpen(clean.labels.col(j), temperature);
  }

  // Guessed labels for every weak view of the unlabeled samples.
  LabeledBatch ubar{Eigen::MatrixXd(dim, nu * views), Eigen::MatrixXd(classes, nu * views)};
  if (nu > 0) {
    std::vector<const ClassifierNet*> nets{&net};
    if (counter != nullptr) nets = {counter, &net};
    const Eigen::MatrixXd guess = guess_labels(uviews, nets, temperature);
    for (int m = 0; m < views; ++m) {
      ubar.inputs.middleCols(m * nu, nu) = uviews[static_cast<std::size_t>(m)];
      ubar.labels.middleCols(m * nu, nu) = guess;
    }
  }

  for (Eigen::Index j = 0; j < nx; ++j) strong.inputs.col(j) = strong_aug(clean.inputs.col(j), aug, aug_rng);

  const auto mixed = mixmatch(xbar, ubar, aug.alpha, mix_rng, cfg.mixup);
  auto lg = loss_and_gradients(net, total_loss_spec(strong, mixed.labeled, mixed.unlabeled, lambda_u));
  sgd_step(net, opt, lg.gradients);
  return lg.loss;
}

}  // namespace

CoTrainState init_ruc(const PseudoLabeledDataset& dataset, const TrainConfig& cfg,
                      const EmbeddingProvider& provider, const std::optional<ClassifierNet>& warm_start) {
  cfg.validate();
  if (!dataset.has_pseudo_labels()) throw ConfigError("dataset has no pseudo-labels");
  CoTrainState s;
  if (warm_start) {
    s.net1 = *warm_start;
    s.net2 = *warm_start;
    reinit_final_layer(s.net1, network_seed(cfg, 1));
    reinit_final_layer(s.net2, network_seed(cfg, 2));
  } else {
    s.net1 = ClassifierNet(dataset.dim, cfg.hidden, dataset.classes, cfg.activation, network_seed(cfg, 1));
    s.net2 = ClassifierNet(dataset.dim, cfg.hidden, dataset.classes, cfg.activation, network_seed(cfg, 2));
  }
  s.opt1 = OptimizerState::for_net(s.net1, cfg.momentum, cfg.weight_decay, cfg.learning_rate);
  s.opt2 = OptimizerState::for_net(s.net2, cfg.momentum, cfg.weight_decay, cfg.learning_rate);
  s.partition = select(dataset, cfg.selection, provider);
  if (s.partition.clean.empty())
    std::cerr << "warning: initial clean set is empty; training relies on refurbishing alone\n";
  s.log.push_back(evaluate_pair(s, dataset, cfg, 0, tau2_at(0, cfg.tau2), 0.0));
  return s;
}

void run_epoch(CoTrainState& s, const PseudoLabeledDataset& ds, const TrainConfig& cfg) {
  const int epoch = s.epoch;
  const auto index = ds.index_by_id();
  std::vector<std::size_t> clean_rows;
  std::vector<const ProbVector*> clean_labels;
  for (const auto& e : s.partition.clean) {
    clean_rows.push_back(index.at(e.id));
    clean_labels.push_back(&e.label);
  }
  std::vector<std::size_t> unclean_rows;
  for (auto id : s.partition.unclean) unclean_rows.push_back(index.at(id));

  const double lr = cosine_lr(epoch, std::max(cfg.epochs, epoch + 1), cfg.learning_rate);
  const int networks = cfg.co_training ? 2 : 1;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  try {
    for (int k = 1; k <= networks; ++k) {
      ClassifierNet& net = k == 1 ? s.net1 : s.net2;
      OptimizerState& opt = k == 1 ? s.opt1 : s.opt2;
      const ClassifierNet* counter = cfg.co_training ? (k == 1 ? &s.net2 : &s.net1) : nullptr;
      opt.learning_rate = lr;
      opt.epoch = epoch;
      const auto ek = static_cast<std::uint64_t>(epoch);
      const auto kk = static_cast<std::uint64_t>(k);
      Rng batch_rng = make_rng(cfg.seed, {kStreamBatch, ek, kk});
      Rng aug_rng = make_rng(cfg.seed, {kStreamAugment, ek, kk});
      Rng smooth_rng = make_rng(cfg.seed, {kStreamSmoothing, ek, kk});
      Rng mix_rng = make_rng(cfg.seed, {kStreamMixup, ek, kk});
      const auto batches = plan_batches(clean_rows.size(), unclean_rows.size(), cfg.batch_size, batch_rng);
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        const double progress = epoch + static_cast<double>(bi) / static_cast<double>(batches.size());
        const double loss = train_batch(net, opt, counter, batches[bi], clean_rows, clean_labels, unclean_rows, ds,
                                        cfg, lambda_u_at(progress, cfg), aug_rng, smooth_rng, mix_rng);
        if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss", epoch);
        loss_sum += loss;
        ++loss_count;
      }
    }
  } catch (const NumericError& e) {
    throw TrainingDiverged(e.what(), epoch);
  }

  const double tau2 = tau2_at(epoch, cfg.tau2);
  if (cfg.refurbish) {
    std::vector<const ClassifierNet*> nets{&s.net1};
    if (cfg.co_training) nets.push_back(&s.net2);
    auto r = co_refurbish(s.partition.unclean, ds, nets, tau2);
    for (auto& e : r.promoted) s.partition.clean.push_back(std::move(e));
    s.partition.unclean = std::move(r.remaining);
  }
  ++s.epoch;
  const double mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
  s.log.push_back(evaluate_pair(s, ds, cfg, s.epoch, tau2, mean_loss));
}

CoTrainState run_ruc(const PseudoLabeledDataset& dataset, const TrainConfig& cfg,
                     const EmbeddingProvider& provider, const std::optional<ClassifierNet>& warm_start) {
  CoTrainState s = init_ruc(dataset, cfg, provider, warm_start);
  while (s.epoch < cfg.epochs) run_epoch(s, dataset, cfg);
  return s;
}

BaselineResult train_baseline(const PseudoLabeledDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (!dataset.has_pseudo_labels()) throw ConfigError("dataset has no pseudo-labels");
  BaselineResult r{ClassifierNet(dataset.dim, cfg.hidden, dataset.classes, cfg.activation, network_seed(cfg, 1)), {}};
  OptimizerState opt = OptimizerState::for_net(r.net, cfg.momentum, cfg.weight_decay, cfg.learning_rate);
  const Eigen::MatrixXd inputs = dataset.feature_matrix();
  Eigen::MatrixXd targets(dataset.classes, inputs.cols());
  for (std::size_t i = 0; i < dataset.size(); ++i) targets.col(static_cast<Eigen::Index>(i)) = dataset.pseudo_labels[i];

  auto row = [&](int epoch, double loss) {
    const auto ev = evaluate(r.net, dataset, cfg.ece_bins);
    EpochMetrics m;
    m.epoch = epoch;
    m.acc_net1 = m.acc_net2 = ev.assignment.accuracy;
    m.ece_net1 = m.ece_net2 = ev.calibration.ece;
    m.clean_size = dataset.size();
    m.loss_total = loss;
    return m;
  };
  r.log.push_back(row(0, 0.0));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.learning_rate = cosine_lr(epoch, cfg.epochs, cfg.learning_rate);
    opt.epoch = epoch;
    Rng batch_rng = make_rng(cfg.seed, {kStreamBaseline, static_cast<std::uint64_t>(epoch)});
    double loss = 0.0;
    try {
      loss = supervised_epoch(r.net, opt, inputs, targets, cfg.batch_size, batch_rng);
    } catch (const NumericError& e) {
      throw TrainingDiverged(e.what(), epoch);
    }
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite baseline loss", epoch);
    r.log.push_back(row(epoch + 1, loss));
  }
  return r;
}

}  // namespace ruc
