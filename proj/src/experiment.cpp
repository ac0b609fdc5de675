#include "ruc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace ruc {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

std::string curve_csv(const std::vector<double>& eps, const std::vector<double>& base,
                      const std::vector<double>& ruc) {
  std::string out = "epsilon,accuracy_baseline,accuracy_ruc\n";
  for (std::size_t i = 0; i < eps.size(); ++i) out += num(eps[i]) + "," + num(base[i]) + "," + num(ruc[i]) + "\n";
  return out;
}

AttackConfig attack_config(const ExperimentConfig& cfg, AttackKind kind) {
  AttackConfig a;
  a.kind = kind;
  a.iterations = cfg.attack.iterations;
  a.label = cfg.attack.label;
  return a;
}

json selection_json(const std::map<Strategy, SelectionQuality>& sel) {
  json j = json::object();
  for (const auto& [s, q] : sel) j[to_string(s)] = to_json(q);
  return j;
}

// Split a comma-separated table into rows of doubles; the header is skipped.
std::vector<std::vector<double>> read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

json mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return json{{"mean", nullptr}, {"stddev", nullptr}, {"n", 0}};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  // Population deviation, so a single seed reports exactly 0.
  var /= static_cast<double>(xs.size());
  return json{{"mean", mean}, {"stddev", std::sqrt(var)}, {"n", xs.size()}};
}

}  // namespace

PseudoLabeledDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.data.file.empty()) {
    PseudoLabeledDataset ds = load_dataset(cfg.data.file);
    if (ds.has_pseudo_labels()) return ds;
    return apply_noise(ds, cfg.noise, seed);
  }
  const auto& d = cfg.data;
  return apply_noise(gen_gaussian_mixture(d.classes, d.per_class, d.dim, d.separation, d.spread, seed), cfg.noise,
                     seed);
}

EmbeddingProvider make_provider(const ExperimentConfig& cfg, const PseudoLabeledDataset& dataset,
                                std::uint64_t seed) {
  if (cfg.data.embedding == "projection")
    return EmbeddingProvider::random_projection(dataset.dim, cfg.data.embedding_dim, seed);
  return EmbeddingProvider::identity(dataset.dim);
}

double pseudo_label_accuracy(const PseudoLabeledDataset& dataset) {
  if (!dataset.has_pseudo_labels()) throw ConfigError("dataset has no pseudo-labels");
  const auto pseudo = dataset.pseudo_classes();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) hit += pseudo[i] == dataset.samples[i].gt;
  return static_cast<double>(hit) / static_cast<double>(dataset.size());
}

std::map<Strategy, SelectionQuality> compare_strategies(const PseudoLabeledDataset& dataset,
                                                        const SelectionConfig& cfg,
                                                        const EmbeddingProvider& provider) {
  std::map<Strategy, SelectionQuality> out;
  for (Strategy s : {Strategy::confidence, Strategy::metric, Strategy::hybrid}) {
    SelectionConfig c = cfg;
    c.strategy = s;
    out[s] = selection_quality(select(dataset, c, provider), dataset);
  }
  return out;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SeedResult r;
  r.seed = seed;
  r.dataset = make_dataset(cfg, seed);
  const TrainConfig train = cfg.resolved_train(seed);
  train.selection.validate(r.dataset.classes);
  const EmbeddingProvider provider = make_provider(cfg, r.dataset, seed);

  r.pseudo_accuracy = pseudo_label_accuracy(r.dataset);
  r.selection = compare_strategies(r.dataset, train.selection, provider);

  r.baseline = train_baseline(r.dataset, train);
  r.ruc = init_ruc(r.dataset, train, provider);
  r.initial_partition = r.ruc.partition;
  while (r.ruc.epoch < train.epochs) run_epoch(r.ruc, r.dataset, train);

  r.ruc_eval = evaluate(r.ruc.net1, r.dataset, train.ece_bins);
  r.baseline_eval = evaluate(r.baseline.net, r.dataset, train.ece_bins);
  for (AttackKind kind : cfg.attack.kinds) {
    const AttackConfig a = attack_config(cfg, kind);
    r.curve_ruc[kind] = robustness_curve(r.ruc.net1, r.dataset, cfg.attack.epsilons, a);
    r.curve_baseline[kind] = robustness_curve(r.baseline.net, r.dataset, cfg.attack.epsilons, a);
  }
  return r;
}

fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) { return fs::path(cfg.out) / std::to_string(seed); }

void write_manifest(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& verb, const fs::path& dir) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json j;
  j["verb"] = verb;
  j["seed"] = seed;
  j["timestamp"] = stamp;
  j["config"] = config_to_json(cfg);
  j["ablation"] = {{"no_cotrain", cfg.ablation.no_cotrain},
                   {"no_smoothing", cfg.ablation.no_smoothing},
                   {"mixmatch_only", cfg.ablation.mixmatch_only}};
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

void write_seed_outputs(const SeedResult& r, const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  save_dataset(r.dataset, dir / "dataset.txt");
  write_text(dir / "metrics_ruc.csv", metric_log_csv(r.ruc.log));
  write_text(dir / "metrics_baseline.csv", metric_log_csv(r.baseline.log));
  save_partition(r.initial_partition, r.dataset, dir / "partition.txt");
  write_text(dir / "selection.json", selection_json(r.selection).dump(2) + "\n");
  for (AttackKind kind : cfg.attack.kinds)
    write_text(dir / (std::string("robustness_") + to_string(kind) + ".csv"),
               curve_csv(cfg.attack.epsilons, r.curve_baseline.at(kind), r.curve_ruc.at(kind)));

  std::vector<bool> clean(r.dataset.size(), false);
  const auto index = r.dataset.index_by_id();
  for (const auto& e : r.initial_partition.clean) clean[index.at(e.id)] = true;
  std::string conf = "id,clean,confidence_ruc,confidence_baseline\n";
  for (std::size_t i = 0; i < r.dataset.size(); ++i)
    conf += std::to_string(r.dataset.samples[i].id) + "," + (clean[i] ? "1" : "0") + "," +
            num(r.ruc_eval.confidences[i]) + "," + num(r.baseline_eval.confidences[i]) + "\n";
  write_text(dir / "confidence.csv", conf);

  save_net(r.ruc.net1, dir / "ruc_net1.net");
  save_net(r.ruc.net2, dir / "ruc_net2.net");
  save_net(r.baseline.net, dir / "baseline.net");

  json s;
  s["seed"] = r.seed;
  s["samples"] = r.dataset.size();
  s["pseudo_accuracy"] = r.pseudo_accuracy;
  s["ruc"] = {{"accuracy", r.ruc_eval.assignment.accuracy},
              {"ece", r.ruc_eval.calibration.ece},
              {"clean_initial", r.initial_partition.clean.size()},
              {"clean_final", r.ruc.partition.clean.size()}};
  s["baseline"] = {{"accuracy", r.baseline_eval.assignment.accuracy}, {"ece", r.baseline_eval.calibration.ece}};
  s["selection"] = selection_json(r.selection);
  write_text(dir / "summary.json", s.dump(2) + "\n");
}

void run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = seed_dir(cfg, seed);
    fs::create_directories(dir);
    write_manifest(cfg, seed, "train", dir);
    const SeedResult r = run_seed(cfg, seed);
    write_seed_outputs(r, cfg, dir);
    std::cerr << "seed " << seed << ": pseudo " << r.pseudo_accuracy << "  baseline "
              << r.baseline_eval.assignment.accuracy << "  ruc " << r.ruc_eval.assignment.accuracy << "\n";
  }
}

void run_gen(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const fs::path dir = seed_dir(cfg, seed);
  fs::create_directories(dir);
  write_manifest(cfg, seed, "gen", dir);
  save_dataset(make_dataset(cfg, seed), dir / "dataset.txt");
}

void run_select(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const fs::path dir = seed_dir(cfg, seed);
  fs::create_directories(dir);
  write_manifest(cfg, seed, "select", dir);
  const PseudoLabeledDataset ds = make_dataset(cfg, seed);
  const TrainConfig train = cfg.resolved_train(seed);
  train.selection.validate(ds.classes);
  const EmbeddingProvider provider = make_provider(cfg, ds, seed);
  save_partition(select(ds, train.selection, provider), ds, dir / "partition.txt");
  write_text(dir / "selection.json", selection_json(compare_strategies(ds, train.selection, provider)).dump(2) + "\n");
}

void run_attack(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const fs::path dir = seed_dir(cfg, seed);
  for (const char* f : {"dataset.txt", "ruc_net1.net", "baseline.net"})
    if (!fs::exists(dir / f)) throw std::runtime_error("missing " + (dir / f).string() + "; run `train` first");
  const PseudoLabeledDataset ds = load_dataset(dir / "dataset.txt");
  const ClassifierNet ruc_net = load_net(dir / "ruc_net1.net");
  const ClassifierNet base_net = load_net(dir / "baseline.net");
  for (AttackKind kind : cfg.attack.kinds) {
    const AttackConfig a = attack_config(cfg, kind);
    write_text(dir / (std::string("robustness_") + to_string(kind) + ".csv"),
               curve_csv(cfg.attack.epsilons, robustness_curve(base_net, ds, cfg.attack.epsilons, a),
                         robustness_curve(ruc_net, ds, cfg.attack.epsilons, a)));
  }
}

const std::vector<std::string>& expected_seed_files() {
  static const std::vector<std::string> files = {
      "manifest.json",       "summary.json",         "metrics_ruc.csv",         "metrics_baseline.csv",
      "selection.json",      "confidence.csv",       "robustness_fgsm.csv",     "robustness_bim.csv"};
  return files;
}

json emit_report(const fs::path& run_dir, int histogram_bins) {
  if (histogram_bins < 1) throw ConfigError("histogram needs at least one bin");
  std::vector<fs::path> seeds;
  if (fs::is_directory(run_dir))
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_directory() && !name.empty() && name.find_first_not_of("0123456789") == std::string::npos)
        seeds.push_back(entry.path());
    }
  std::sort(seeds.begin(), seeds.end());
  if (seeds.empty()) {
    std::string msg = "no seed directories under " + run_dir.string() + "; each <seed>/ should contain:";
    for (const auto& f : expected_seed_files()) msg += " " + f;
    throw ReportError(msg);
  }

  json report;
  json gaps = json::array();
  std::map<std::string, std::vector<double>> scalars;
  // kind -> epsilon row -> {baseline values, ruc values}
  std::map<std::string, std::vector<std::pair<double, std::array<std::vector<double>, 2>>>> curves;
  std::vector<std::array<std::size_t, 4>> hist(static_cast<std::size_t>(histogram_bins), {0, 0, 0, 0});
  std::size_t hist_total = 0;
  json per_seed = json::array();

  for (const auto& dir : seeds) {
    const std::string seed = dir.filename().string();
    for (const auto& f : expected_seed_files())
      if (!fs::exists(dir / f)) gaps.push_back(seed + "/" + f);

    if (fs::exists(dir / "summary.json")) {
      const json s = json::parse(read_text(dir / "summary.json"));
      per_seed.push_back(s);
      scalars["pseudo_accuracy"].push_back(s["pseudo_accuracy"]);
      scalars["ruc_accuracy"].push_back(s["ruc"]["accuracy"]);
      scalars["ruc_ece"].push_back(s["ruc"]["ece"]);
      scalars["baseline_accuracy"].push_back(s["baseline"]["accuracy"]);
      scalars["baseline_ece"].push_back(s["baseline"]["ece"]);
      for (const auto& [strategy, q] : s["selection"].items()) {
        scalars["selection_" + strategy + "_precision"].push_back(q["precision"]);
        scalars["selection_" + strategy + "_recall"].push_back(q["recall"]);
      }
    }
    for (const char* kind : {"fgsm", "bim"}) {
      const fs::path p = dir / (std::string("robustness_") + kind + ".csv");
      if (!fs::exists(p)) continue;
      auto& rows = curves[kind];
      const auto table = read_csv(p);
      for (std::size_t i = 0; i < table.size(); ++i) {
        if (rows.size() <= i) rows.push_back({table[i][0], {}});
        rows[i].second[0].push_back(table[i][1]);
        rows[i].second[1].push_back(table[i][2]);
      }
    }
    if (fs::exists(dir / "confidence.csv")) {
      for (const auto& row : read_csv(dir / "confidence.csv")) {
        const bool clean = row[1] != 0.0;
        for (int net = 0; net < 2; ++net) {
          const double c = row[2 + static_cast<std::size_t>(net)];
          auto bin = static_cast<std::size_t>(std::floor(c * histogram_bins));
          bin = std::min(bin, static_cast<std::size_t>(histogram_bins - 1));
          hist[bin][static_cast<std::size_t>(2 * net + (clean ? 0 : 1))]++;
        }
        ++hist_total;
      }
    }
  }

  report["seeds"] = seeds.size();
  report["gaps"] = gaps;
  json summary = json::object();
  for (const auto& [k, v] : scalars) summary[k] = mean_std(v);
  report["summary"] = summary;
  report["per_seed"] = per_seed;

  std::string curve_out = "attack,epsilon,baseline_mean,baseline_stddev,ruc_mean,ruc_stddev\n";
  json curves_json = json::object();
  for (const auto& [kind, rows] : curves)
    for (const auto& [eps, vals] : rows) {
      const json b = mean_std(vals[0]);
      const json r = mean_std(vals[1]);
      curves_json[kind].push_back({{"epsilon", eps}, {"baseline", b}, {"ruc", r}});
      curve_out += kind + "," + num(eps) + "," + num(b["mean"]) + "," + num(b["stddev"]) + "," + num(r["mean"]) +
                   "," + num(r["stddev"]) + "\n";
    }
  report["robustness"] = curves_json;

  std::string hist_out = "bin_lower,bin_upper,ruc_clean,ruc_unclean,baseline_clean,baseline_unclean\n";
  json hist_json = json::array();
  for (std::size_t b = 0; b < hist.size(); ++b) {
    const double lo = static_cast<double>(b) / histogram_bins;
    const double hi = static_cast<double>(b + 1) / histogram_bins;
    hist_out += num(lo) + "," + num(hi) + "," + std::to_string(hist[b][0]) + "," + std::to_string(hist[b][1]) + "," +
                std::to_string(hist[b][2]) + "," + std::to_string(hist[b][3]) + "\n";
    hist_json.push_back({{"lower", lo},
                         {"upper", hi},
                         {"ruc_clean", hist[b][0]},
                         {"ruc_unclean", hist[b][1]},
                         {"baseline_clean", hist[b][2]},
                         {"baseline_unclean", hist[b][3]}});
  }
  report["confidence_histogram"] = {{"samples", hist_total}, {"bins", hist_json}};

  write_text(run_dir / "report.json", report.dump(2) + "\n");
  write_text(run_dir / "robustness_summary.csv", curve_out);
  write_text(run_dir / "confidence_hist.csv", hist_out);
  return report;
}

}  // namespace ruc
