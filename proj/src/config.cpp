#include "ruc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ruc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError("'" + raw + "' is not a valid number");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + raw + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

using C = ExperimentConfig;

template <typename Get>
ConfigKey dbl(const char* sec, const char* key, const char* help, Get ref) {
  return {sec, key, help, [ref](C& c, const std::string& v) { ref(c) = parse_number<double>(v); },
          [ref](const C& c) { return fmt(ref(c)); }};
}

template <typename Get>
ConfigKey integer(const char* sec, const char* key, const char* help, Get ref) {
  return {sec, key, help, [ref](C& c, const std::string& v) { ref(c) = parse_number<int>(v); },
          [ref](const C& c) { return std::to_string(ref(c)); }};
}

template <typename Get>
ConfigKey boolean(const char* sec, const char* key, const char* help, Get ref) {
  return {sec, key, help, [ref](C& c, const std::string& v) { ref(c) = parse_bool(v); },
          [ref](const C& c) { return fmt(ref(c)); }};
}

template <typename Get>
ConfigKey text(const char* sec, const char* key, const char* help, Get ref) {
  return {sec, key, help, [ref](C& c, const std::string& v) { ref(c) = trim(v); },
          [ref](const C& c) { return ref(c); }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  // [data]
  k.push_back(text("data", "file", "dataset file (overrides the generator)", [](auto& c) -> auto& { return c.data.file; }));
  k.push_back(integer("data", "classes", "number of classes C", [](auto& c) -> auto& { return c.data.classes; }));
  k.push_back(integer("data", "per_class", "samples per class", [](auto& c) -> auto& { return c.data.per_class; }));
  k.push_back(integer("data", "dim", "feature dimension D", [](auto& c) -> auto& { return c.data.dim; }));
  k.push_back(dbl("data", "separation", "distance of each cluster mean from the origin", [](auto& c) -> auto& { return c.data.separation; }));
  k.push_back(dbl("data", "spread", "within-cluster standard deviation", [](auto& c) -> auto& { return c.data.spread; }));
  k.push_back(text("data", "embedding", "identity | projection", [](auto& c) -> auto& { return c.data.embedding; }));
  k.push_back(integer("data", "embedding_dim", "output size of the random projection", [](auto& c) -> auto& { return c.data.embedding_dim; }));
  // [noise]
  k.push_back(dbl("noise", "rate", "fraction of corrupted pseudo-labels", [](auto& c) -> auto& { return c.noise.rate; }));
  k.push_back({"noise", "profile", "onehot | overconfident | tempered",
               [](C& c, const std::string& v) { c.noise.profile = parse_profile(trim(v)); },
               [](const C& c) { return std::string(to_string(c.noise.profile)); }});
  k.push_back(dbl("noise", "peak", "mean mass on the assigned class (overconfident)", [](auto& c) -> auto& { return c.noise.peak; }));
  k.push_back(dbl("noise", "peak_jitter", "half-width of the per-sample peak draw", [](auto& c) -> auto& { return c.noise.peak_jitter; }));
  k.push_back(dbl("noise", "temperature", "softmax temperature (tempered)", [](auto& c) -> auto& { return c.noise.temperature; }));
  k.push_back({"noise", "corruption", "uniform_flip | neighbor_flip",
               [](C& c, const std::string& v) { c.noise.corruption = parse_corruption(trim(v)); },
               [](const C& c) { return std::string(to_string(c.noise.corruption)); }});
  // [selection]
  k.push_back({"selection", "strategy", "confidence | metric | hybrid",
               [](C& c, const std::string& v) { c.train.selection.strategy = parse_strategy(trim(v)); },
               [](const C& c) { return std::string(to_string(c.train.selection.strategy)); }});
  k.push_back(dbl("selection", "tau1", "confidence threshold", [](auto& c) -> auto& { return c.train.selection.tau1; }));
  k.push_back(integer("selection", "k", "neighbours in the kNN vote", [](auto& c) -> auto& { return c.train.selection.k; }));
  // [train]
  k.push_back(integer("train", "epochs", "training epochs", [](auto& c) -> auto& { return c.train.epochs; }));
  k.push_back(integer("train", "batch_size", "mini-batch size B", [](auto& c) -> auto& { return c.train.batch_size; }));
  k.push_back(dbl("train", "learning_rate", "initial SGD learning rate (cosine decay)", [](auto& c) -> auto& { return c.train.learning_rate; }));
  k.push_back(dbl("train", "momentum", "SGD momentum", [](auto& c) -> auto& { return c.train.momentum; }));
  k.push_back(dbl("train", "weight_decay", "L2 weight decay", [](auto& c) -> auto& { return c.train.weight_decay; }));
  k.push_back(dbl("train", "smoothing", "label-smoothing epsilon", [](auto& c) -> auto& { return c.train.smoothing; }));
  k.push_back({"train", "smoothing_mode", "fixed | uniform",
               [](C& c, const std::string& v) { c.train.smoothing_mode = parse_smoothing_mode(trim(v)); },
               [](const C& c) { return std::string(to_string(c.train.smoothing_mode)); }});
  k.push_back(integer("train", "augmentations", "weak views per unlabeled sample M", [](auto& c) -> auto& { return c.train.augmentations; }));
  k.push_back(dbl("train", "lambda_u", "unlabeled loss weight", [](auto& c) -> auto& { return c.train.lambda_u; }));
  k.push_back(dbl("train", "lambda_u_rampup", "epochs over which lambda_u ramps up from 0", [](auto& c) -> auto& { return c.train.lambda_u_rampup; }));
  k.push_back(dbl("train", "tau2_start", "refurbish threshold at epoch 0", [](auto& c) -> auto& { return c.train.tau2.start; }));
  k.push_back(dbl("train", "tau2_step", "refurbish threshold increment", [](auto& c) -> auto& { return c.train.tau2.step; }));
  k.push_back(integer("train", "tau2_every", "epochs between increments", [](auto& c) -> auto& { return c.train.tau2.every; }));
  k.push_back(dbl("train", "tau2_cap", "refurbish threshold ceiling", [](auto& c) -> auto& { return c.train.tau2.cap; }));
  k.push_back({"train", "hidden", "comma-separated hidden widths",
               [](C& c, const std::string& v) {
                 c.train.hidden.clear();
                 for (const auto& s : split_list(v)) c.train.hidden.push_back(parse_number<int>(s));
               },
               [](const C& c) { return join(c.train.hidden, [](int w) { return std::to_string(w); }); }});
  k.push_back({"train", "activation", "relu | tanh | identity",
               [](C& c, const std::string& v) { c.train.activation = parse_activation(trim(v)); },
               [](const C& c) { return std::string(to_string(c.train.activation)); }});
  k.push_back(boolean("train", "co_training", "train two networks", [](auto& c) -> auto& { return c.train.co_training; }));
  k.push_back(boolean("train", "mixup", "MixUp inside MixMatch", [](auto& c) -> auto& { return c.train.mixup; }));
  k.push_back(boolean("train", "refurbish", "promote confident unclean samples", [](auto& c) -> auto& { return c.train.refurbish; }));
  k.push_back(integer("train", "ece_bins", "calibration buckets", [](auto& c) -> auto& { return c.train.ece_bins; }));
  // [augment]
  k.push_back(dbl("augment", "weak_sigma", "weak jitter stddev", [](auto& c) -> auto& { return c.train.augment.weak_sigma; }));
  k.push_back(dbl("augment", "strong_sigma", "strong jitter stddev", [](auto& c) -> auto& { return c.train.augment.strong_sigma; }));
  k.push_back(dbl("augment", "dropout", "strong feature-dropout probability", [](auto& c) -> auto& { return c.train.augment.dropout; }));
  k.push_back(dbl("augment", "scale", "strong scale jitter half-range", [](auto& c) -> auto& { return c.train.augment.scale; }));
  k.push_back(dbl("augment", "alpha", "MixUp Beta parameter", [](auto& c) -> auto& { return c.train.augment.alpha; }));
  k.push_back(dbl("augment", "temperature", "sharpening temperature", [](auto& c) -> auto& { return c.train.augment.temperature; }));
  // [attack]
  k.push_back({"attack", "kinds", "comma-separated fgsm,bim",
               [](C& c, const std::string& v) {
                 c.attack.kinds.clear();
                 for (const auto& s : split_list(v)) c.attack.kinds.push_back(parse_attack_kind(s));
               },
               [](const C& c) { return join(c.attack.kinds, [](AttackKind a) { return std::string(to_string(a)); }); }});
  k.push_back({"attack", "epsilons", "comma-separated perturbation budgets",
               [](C& c, const std::string& v) {
                 c.attack.epsilons.clear();
                 for (const auto& s : split_list(v)) c.attack.epsilons.push_back(parse_number<double>(s));
               },
               [](const C& c) { return join(c.attack.epsilons, [](double e) { return fmt(e); }); }});
  k.push_back(integer("attack", "iterations", "BIM iterations", [](auto& c) -> auto& { return c.attack.iterations; }));
  k.push_back({"attack", "label", "prediction | ground_truth",
               [](C& c, const std::string& v) { c.attack.label = parse_attack_label(trim(v)); },
               [](const C& c) { return std::string(to_string(c.attack.label)); }});
  // [ablation]
  k.push_back(boolean("ablation", "no_cotrain", "single network, no co-refinement", [](auto& c) -> auto& { return c.ablation.no_cotrain; }));
  k.push_back(boolean("ablation", "no_smoothing", "force epsilon to 0", [](auto& c) -> auto& { return c.ablation.no_smoothing; }));
  k.push_back(boolean("ablation", "mixmatch_only", "no_cotrain and no_smoothing together", [](auto& c) -> auto& { return c.ablation.mixmatch_only; }));
  // [output]
  k.push_back(text("output", "dir", "output root", [](auto& c) -> auto& { return c.out; }));
  k.push_back({"output", "seeds", "comma-separated master seeds",
               [](C& c, const std::string& v) {
                 c.seeds.clear();
                 for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(s));
               },
               [](const C& c) { return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }); }});
  return k;
}

ExperimentConfig folded(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  const bool single = c.ablation.no_cotrain || c.ablation.mixmatch_only;
  const bool plain = c.ablation.no_smoothing || c.ablation.mixmatch_only;
  if (single) c.train.co_training = false;
  if (plain) c.train.smoothing = 0.0;
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto field = [](const std::string& name, auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
  };
  if (seeds.empty()) throw ConfigError("output.seeds: at least one seed is required");
  if (out.empty()) throw ConfigError("output.dir: must not be empty");
  if (data.file.empty()) {
    if (data.classes < 2) throw ConfigError("data.classes: need at least 2 classes");
    if (data.per_class < 1) throw ConfigError("data.per_class: must be positive");
    if (data.dim < 1) throw ConfigError("data.dim: must be positive");
    if (!(data.separation > 0.0)) throw ConfigError("data.separation: must be positive");
    if (!(data.spread > 0.0)) throw ConfigError("data.spread: must be positive");
    field("noise", [&] { noise.validate(data.classes); });
    field("selection", [&] { train.selection.validate(data.classes); });
  }
  if (data.embedding != "identity" && data.embedding != "projection")
    throw ConfigError("data.embedding: expected identity or projection, got '" + data.embedding + "'");
  if (data.embedding_dim < 1) throw ConfigError("data.embedding_dim: must be positive");
  field("train", [&] { train.validate(); });
  if (attack.iterations < 1) throw ConfigError("attack.iterations: must be positive");
  for (double e : attack.epsilons)
    if (!(e >= 0.0)) throw ConfigError("attack.epsilons: budgets must be non-negative");
}

TrainConfig ExperimentConfig::resolved_train(std::uint64_t seed) const {
  TrainConfig t = folded(*this).train;
  t.seed = seed;
  return t;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& dotted, const std::string& value) {
  const auto& keys = config_keys();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name() == dotted; });
  if (it == keys.end()) throw ConfigError("unknown key '" + dotted + "'");
  try {
    it->set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(dotted + ": " + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(cfg, section + "." + key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      out += (section.empty() ? "[" : "\n[") + k.section + "]\n";
      section = k.section;
    }
    out += k.key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  const ExperimentConfig c = folded(cfg);
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) j[k.section][k.key] = k.get(c);
  return j;
}

}  // namespace ruc
