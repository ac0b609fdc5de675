// ruc: generate noisy pseudo-labelled data, select a clean set, retrain,
// attack and report.

#include "ruc/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>
#include <optional>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file with [sections]");
  cmd->add_option("--seed", c.seed, "run a single master seed instead of output.seeds");
  cmd->add_option("--out", c.out, "output root (output.dir)");
  for (const auto& key : ruc::config_keys()) {
    const std::string name = key.name();
    cmd->add_option_function<std::string>(
        "--" + name, [&c, name](const std::string& v) { c.overrides[name] = v; }, key.help);
  }
}

ruc::ExperimentConfig resolve(const Common& c) {
  ruc::ExperimentConfig cfg = c.config.empty() ? ruc::ExperimentConfig{} : ruc::load_config(c.config);
  for (const auto& [name, value] : c.overrides) ruc::set_config_value(cfg, name, value);
  if (!c.out.empty()) cfg.out = c.out;
  if (c.seed) cfg.seeds = {*c.seed};
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust retraining of noisy clustering pseudo-labels"};
  app.require_subcommand(1);
  Common common;
  auto* gen = app.add_subcommand("gen", "generate a pseudo-labelled dataset");
  auto* sel = app.add_subcommand("select", "split into clean and unclean sets");
  auto* train = app.add_subcommand("train", "baseline and robust retraining with evaluation");
  auto* attack = app.add_subcommand("attack", "adversarial sweep on trained checkpoints");
  auto* report = app.add_subcommand("report", "aggregate a run directory");
  for (auto* cmd : {gen, sel, train, attack, report}) add_common(cmd, common);
  int bins = 10;
  report->add_option("--bins", bins, "confidence histogram bins")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const ruc::ExperimentConfig cfg = resolve(common);
    if (*train) {
      ruc::run_experiment(cfg);
    } else if (*report) {
      const auto r = ruc::emit_report(cfg.out, bins);
      for (const auto& gap : r["gaps"]) std::cerr << "missing: " << gap.get<std::string>() << "\n";
      std::cout << r["summary"].dump(2) << "\n";
    } else {
      for (std::uint64_t seed : cfg.seeds) {
        if (*gen) ruc::run_gen(cfg, seed);
        if (*sel) ruc::run_select(cfg, seed);
        if (*attack) ruc::run_attack(cfg, seed);
      }
    }
  } catch (const ruc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
