// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The five-seed standard fixture is trained once and shared
// by criteria 5 to 10.

#include "oracles.hpp"

#include "ruc/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace ruc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

LabeledBatch random_batch(int dim, int classes, int n, Rng& rng) {
  LabeledBatch b{random_matrix(dim, n, rng), Eigen::MatrixXd(classes, n)};
  for (int j = 0; j < n; ++j) b.labels.col(j) = oracle::random_prob(classes, rng);
  return b;
}

// 1. Every loss term and the input gradient against central differences.
Outcome gradients_criterion() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, {1}));
  const Activation acts[] = {Activation::relu, Activation::tanh};
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const int dim = 3 + inst % 4, classes = 2 + inst % 4;
    const ClassifierNet net = oracle::random_net(dim, {6}, classes, acts[inst % 2], rng);
    const auto strong = random_batch(dim, classes, 3, rng);
    const auto xhat = random_batch(dim, classes, 4, rng);
    const auto uhat = random_batch(dim, classes, 5, rng);
    const LossSpec total = total_loss_spec(strong, xhat, uhat, 25.0);
    // Each term alone, then the weighted sum.
    std::vector<LossSpec> specs;
    for (const auto& term : total) specs.push_back({term});
    specs.push_back(total);
    for (const auto& spec : specs) {
      const auto g = gradients(net, spec);
      worst = std::max(worst, oracle::max_rel_error(g, oracle::fd_gradients(net, spec)));
    }
    const Eigen::MatrixXd gx = input_gradients(net, xhat.inputs, xhat.labels);
    for (Eigen::Index j = 0; j < xhat.size(); ++j) {
      const Eigen::VectorXd fd = oracle::fd_input_gradient(net, xhat.inputs.col(j), xhat.labels.col(j));
      for (Eigen::Index i = 0; i < fd.size(); ++i) worst = std::max(worst, oracle::rel_error(gx(i, j), fd(i)));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0, fmt("max rel error %.2e over 20 instances (< 1e-4), %.2f s (< 10 s)", worst, secs)};
}

// 2. Hungarian accuracy against exhaustive permutation search.
Outcome hungarian_criterion() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, {2}));
  std::uniform_int_distribution<int> size(1, 6), count(0, 15);
  int exact = 0;
  for (int t = 0; t < 200; ++t) {
    const int C = size(rng);
    Eigen::MatrixXi table(C, C);
    std::vector<int> pred, gt;
    for (int p = 0; p < C; ++p)
      for (int g = 0; g < C; ++g) {
        table(p, g) = count(rng);
        for (int k = 0; k < table(p, g); ++k) {
          pred.push_back(p);
          gt.push_back(g);
        }
      }
    if (pred.empty()) {
      table(0, 0) = 1;
      pred.push_back(0);
      gt.push_back(0);
    }
    const auto r = hungarian_accuracy(pred, gt, C);
    const long best = oracle::brute_force_matching(table);
    exact += static_cast<long>(r.matched) == best &&
             r.accuracy == static_cast<double>(best) / static_cast<double>(pred.size());
  }
  const double secs = seconds_since(t0);
  return {exact == 200 && secs < 5.0, fmt("%d/200 tables exact, %.2f s (< 5 s)", exact, secs)};
}

// 3. Simplex preservation of every label-producing function.
Outcome simplex_criterion() {
  Rng rng(derive_seed(1, {3}));
  std::uniform_real_distribution<double> unit(0.0, 1.0), temp(0.05, 3.0);
  const int n = 10000;
  int bad_smooth = 0, bad_sharpen = 0, bad_argmax = 0, bad_mixup = 0, bad_refine = 0, bad_guess = 0;
  const AugmentConfig aug;
  for (int t = 0; t < n; ++t) {
    const int C = 2 + t % 9;
    const int D = 1 + t % 5;
    const ProbVector p = oracle::random_prob(C, rng);
    const ProbVector q = oracle::random_prob(C, rng);
    bad_smooth += !is_prob_vector(smooth_label(p, unit(rng) * 0.999, C));
    const ProbVector s = sharpen(p, temp(rng));
    bad_sharpen += !is_prob_vector(s);
    bad_argmax += argmax(s) != argmax(p);
    bad_mixup += !is_prob_vector(mixup(random_matrix(D, 1, rng).col(0), p, random_matrix(D, 1, rng).col(0), q,
                                       0.1 + 2.0 * unit(rng), rng).y);
    const ClassifierNet a = oracle::random_net(D, {4}, C, Activation::relu, rng, 1.0);
    const ClassifierNet b = oracle::random_net(D, {4}, C, Activation::tanh, rng, 1.0);
    const Eigen::VectorXd x = 3.0 * random_matrix(D, 1, rng).col(0);
    bad_refine += !is_prob_vector(co_refine_labeled(x, p, a, unit(rng), temp(rng)));
    bad_guess += !is_prob_vector(guess_unlabeled(x, a, t % 2 ? &b : nullptr, 1 + t % 3, temp(rng), aug, rng));
  }
  const int bad = bad_smooth + bad_sharpen + bad_argmax + bad_mixup + bad_refine + bad_guess;
  return {bad == 0, fmt("violations over %d inputs: smooth %d, sharpen %d, argmax %d, mixup %d, refine %d, guess %d",
                        n, bad_smooth, bad_sharpen, bad_argmax, bad_mixup, bad_refine, bad_guess)};
}

// 4. With every extra component off, one epoch is plain supervised training.
Outcome reduction_criterion() {
  NoiseModel noise;
  noise.profile = ConfidenceProfile::onehot;
  const auto ds = apply_noise(gen_gaussian_mixture(4, 500, 16, 4.0, 1.0, 1), noise, 1);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.epochs = 1;
  cfg.smoothing = 0.0;
  cfg.co_training = false;
  cfg.lambda_u = 0.0;
  cfg.augmentations = 1;
  cfg.augment = AugmentConfig::disabled();
  cfg.mixup = false;
  cfg.refurbish = false;
  auto s = init_ruc(ds, cfg, EmbeddingProvider::identity(ds.dim));
  // The batch plan of the labeled list matches a labeled-only plan as long
  // as the clean set is the longer of the two.
  if (s.partition.clean.size() < s.partition.unclean.size())
    return {false, fmt("clean set (%zu) smaller than unclean set (%zu); fixture unsuitable",
                       s.partition.clean.size(), s.partition.unclean.size())};

  ClassifierNet ref = s.net1;
  OptimizerState opt = OptimizerState::for_net(ref, cfg.momentum, cfg.weight_decay, cfg.learning_rate);
  const auto index = ds.index_by_id();
  const auto n = static_cast<Eigen::Index>(s.partition.clean.size());
  Eigen::MatrixXd inputs(ds.dim, n), targets(ds.classes, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& e = s.partition.clean[static_cast<std::size_t>(j)];
    inputs.col(j) = ds.samples[index.at(e.id)].x;
    targets.col(j) = e.label;
  }
  Rng batch_rng = make_rng(cfg.seed, {kStreamBatch, 0, 1});
  // The strong-view and mixed labeled terms coincide, hence the factor 2.
  supervised_epoch(ref, opt, inputs, targets, cfg.batch_size, batch_rng, 2.0);
  run_epoch(s, ds, cfg);

  double worst = 0.0;
  for (std::size_t l = 0; l < ref.layers().size(); ++l) {
    worst = std::max(worst, (ref.layers()[l].weight - s.net1.layers()[l].weight).cwiseAbs().maxCoeff());
    worst = std::max(worst, (ref.layers()[l].bias - s.net1.layers()[l].bias).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("max parameter difference %.3e (<= 1e-12), %zu clean / %zu unclean", worst,
                              s.partition.clean.size(), s.partition.unclean.size())};
}

ExperimentConfig standard_fixture() {
  ExperimentConfig cfg;
  cfg.data.classes = 4;
  cfg.data.per_class = 500;
  cfg.data.dim = 16;
  cfg.data.separation = 4.0;
  cfg.data.spread = 1.0;
  cfg.noise.rate = 0.30;
  cfg.noise.corruption = Corruption::neighbor_flip;
  cfg.noise.profile = ConfidenceProfile::overconfident;
  cfg.noise.peak = 0.99;
  cfg.train.selection.strategy = Strategy::hybrid;
  cfg.train.epochs = 50;
  cfg.attack.kinds = {AttackKind::fgsm, AttackKind::bim};
  cfg.attack.epsilons = {0.0, 0.05, 0.1, 0.2, 0.4};
  cfg.attack.iterations = 5;
  cfg.seeds = {1, 2, 3, 4, 5};
  return cfg;
}

// 5. The clean set never shrinks.
Outcome monotone_criterion(const std::vector<SeedResult>& runs) {
  int drops = 0;
  std::size_t epochs = 0;
  for (const auto& r : runs)
    for (std::size_t e = 1; e < r.ruc.log.size(); ++e, ++epochs) drops += r.ruc.log[e].clean_size < r.ruc.log[e - 1].clean_size;
  return {drops == 0 && epochs > 0, fmt("%d decreases over %zu epoch transitions in %zu runs", drops, epochs, runs.size())};
}

// 6. Retrained accuracy beats the pseudo-labels by 5 points.
Outcome improvement_criterion(const std::vector<SeedResult>& runs, double seconds) {
  int wins = 0;
  std::string per;
  for (const auto& r : runs) {
    const double acc = r.ruc_eval.assignment.accuracy;
    wins += acc >= r.pseudo_accuracy + 0.05;
    per += fmt(" %.3f->%.3f", r.pseudo_accuracy, acc);
  }
  return {wins >= 4 && seconds < 300.0, fmt("%d/5 seeds gain >= 5 pp (need 4);%s; %.1f s for 5 seeds (< 300 s)",
                                            wins, per.c_str(), seconds)};
}

// 7. Retrained ECE no worse than the ERM baseline's.
Outcome calibration_criterion(const std::vector<SeedResult>& runs) {
  int wins = 0;
  std::string per;
  for (const auto& r : runs) {
    wins += r.ruc_eval.calibration.ece <= r.baseline_eval.calibration.ece;
    per += fmt(" %.3f/%.3f", r.ruc_eval.calibration.ece, r.baseline_eval.calibration.ece);
  }
  return {wins >= 4, fmt("%d/5 seeds with ECE ruc <= baseline (need 4); ruc/baseline:%s", wins, per.c_str())};
}

// 8. Hybrid precision and metric recall.
Outcome selection_criterion(const std::vector<SeedResult>& runs) {
  int prec = 0, rec = 0;
  for (const auto& r : runs) {
    const auto& h = r.selection.at(Strategy::hybrid);
    const auto& c = r.selection.at(Strategy::confidence);
    const auto& m = r.selection.at(Strategy::metric);
    prec += h.precision >= std::max(c.precision, m.precision) - 0.02;
    rec += m.recall >= c.recall;
  }
  return {prec >= 4 && rec >= 4,
          fmt("hybrid precision within 0.02 of best on %d/5, metric recall >= confidence recall on %d/5 (need 4 each)",
              prec, rec)};
}

// 9. Robustness ordering under FGSM and BIM.
Outcome adversarial_criterion(const std::vector<SeedResult>& runs, const std::vector<double>& eps) {
  int seeds_all = 0;
  for (const auto& r : runs) {
    bool all = true;
    for (std::size_t i = 0; i < eps.size(); ++i)
      all = all && r.curve_ruc.at(AttackKind::fgsm)[i] >= r.curve_baseline.at(AttackKind::fgsm)[i];
    seeds_all += all;
  }
  auto mean_order = [&](AttackKind kind, std::string& text) {
    bool ok = true;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      double a = 0.0, b = 0.0;
      for (const auto& r : runs) {
        a += r.curve_ruc.at(kind)[i];
        b += r.curve_baseline.at(kind)[i];
      }
      a /= static_cast<double>(runs.size());
      b /= static_cast<double>(runs.size());
      ok = ok && a >= b;
      text += fmt(" %.2f:%.3f/%.3f", eps[i], a, b);
    }
    return ok;
  };
  std::string fg, bi;
  const bool fgsm_mean = mean_order(AttackKind::fgsm, fg);
  const bool bim_mean = mean_order(AttackKind::bim, bi);
  return {seeds_all >= 3 && fgsm_mean && bim_mean,
          fmt("FGSM ruc >= baseline at every eps on %d/5 seeds (need 3); mean ruc/baseline FGSM%s; BIM%s", seeds_all,
              fg.c_str(), bi.c_str())};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Byte-identical metric CSVs from a repeated run.
Outcome determinism_criterion(const ExperimentConfig& cfg, const SeedResult& first) {
  const fs::path root = fs::temp_directory_path() / "ruc_acceptance_determinism";
  fs::remove_all(root);
  const SeedResult again = run_seed(cfg, first.seed);
  write_seed_outputs(first, cfg, root / "a");
  write_seed_outputs(again, cfg, root / "b");
  int same = 0, total = 0;
  for (const char* f : {"metrics_ruc.csv", "metrics_baseline.csv", "robustness_fgsm.csv", "robustness_bim.csv",
                        "confidence.csv"}) {
    ++total;
    same += slurp(root / "a" / f) == slurp(root / "b" / f) && !slurp(root / "a" / f).empty();
  }
  fs::remove_all(root);
  return {same == total, fmt("%d/%d metric files byte-identical for seed %llu", same, total,
                             static_cast<unsigned long long>(first.seed))};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient correctness", gradients_criterion);
  report(2, "Hungarian oracle equivalence", hungarian_criterion);
  report(3, "simplex preservation", simplex_criterion);
  report(4, "reduction to supervised training", reduction_criterion);

  const ExperimentConfig cfg = standard_fixture();
  std::vector<SeedResult> runs;
  double seconds = 0.0;
  std::string fixture_error;
  try {
    cfg.validate();
    const auto t0 = Clock::now();
    for (std::uint64_t seed : cfg.seeds) runs.push_back(run_seed(cfg, seed));
    seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    fixture_error = e.what();
  }
  auto on_fixture = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!fixture_error.empty()) return {false, "fixture run failed: " + fixture_error};
      return fn();
    };
  };
  report(5, "refurbish monotonicity", on_fixture([&] { return monotone_criterion(runs); }));
  report(6, "end-to-end improvement", on_fixture([&] { return improvement_criterion(runs, seconds); }));
  report(7, "calibration direction", on_fixture([&] { return calibration_criterion(runs); }));
  report(8, "selection-quality direction", on_fixture([&] { return selection_criterion(runs); }));
  report(9, "adversarial direction", on_fixture([&] { return adversarial_criterion(runs, cfg.attack.epsilons); }));
  report(10, "determinism", on_fixture([&] { return determinism_criterion(cfg, runs.front()); }));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
