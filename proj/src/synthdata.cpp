#include "ruc/synthdata.hpp"

#include "ruc/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ruc {

Eigen::MatrixXd PseudoLabeledDataset::feature_matrix() const {
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = samples[i].x;
  return m;
}

std::vector<int> PseudoLabeledDataset::ground_truth() const {
  std::vector<int> gt;
  gt.reserve(samples.size());
  for (const auto& s : samples) gt.push_back(s.gt);
  return gt;
}

std::vector<int> PseudoLabeledDataset::pseudo_classes() const {
  std::vector<int> out;
  out.reserve(pseudo_labels.size());
  for (const auto& p : pseudo_labels) out.push_back(argmax(p));
  return out;
}

std::unordered_map<SampleId, std::size_t> PseudoLabeledDataset::index_by_id() const {
  std::unordered_map<SampleId, std::size_t> idx;
  idx.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) idx.emplace(samples[i].id, i);
  return idx;
}

const char* to_string(ConfidenceProfile p) {
  switch (p) {
    case ConfidenceProfile::onehot: return "onehot";
    case ConfidenceProfile::overconfident: return "overconfident";
    case ConfidenceProfile::tempered: return "tempered";
  }
  return "unknown";
}

const char* to_string(Corruption c) {
  return c == Corruption::uniform_flip ? "uniform" : "neighbor";
}

ConfidenceProfile parse_profile(const std::string& s) {
  if (s == "onehot") return ConfidenceProfile::onehot;
  if (s == "overconfident") return ConfidenceProfile::overconfident;
  if (s == "tempered") return ConfidenceProfile::tempered;
  throw ConfigError("unknown confidence profile '" + s + "'");
}

Corruption parse_corruption(const std::string& s) {
  if (s == "uniform" || s == "uniform-flip") return Corruption::uniform_flip;
  if (s == "neighbor" || s == "neighbor-flip") return Corruption::neighbor_flip;
  throw ConfigError("unknown corruption kind '" + s + "'");
}

void NoiseModel::validate(int classes) const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
  if (profile == ConfidenceProfile::overconfident) {
    if (!(peak > 1.0 / classes && peak <= 1.0)) throw ConfigError("peak must lie in (1/C, 1]");
    if (!(peak_jitter >= 0.0) || peak - peak_jitter <= 1.0 / classes)
      throw ConfigError("peak jitter must keep every peak above 1/C");
  }
  if (profile == ConfidenceProfile::tempered && !(temperature > 0.0))
    throw ConfigError("tempered profile needs temperature > 0");
}

std::string NoiseModel::describe() const {
  std::ostringstream os;
  os << "rate=" << rate << " corruption=" << to_string(corruption) << " profile=" << to_string(profile);
  if (profile == ConfidenceProfile::overconfident) os << " peak=" << peak << " jitter=" << peak_jitter;
  if (profile == ConfidenceProfile::tempered) os << " temperature=" << temperature;
  return os.str();
}

PseudoLabeledDataset gen_gaussian_mixture(int classes, int n_per_class, int dim, double separation,
                                          double spread, std::uint64_t seed) {
  if (classes < 2 || dim < 2) throw ConfigError("need C >= 2 and D >= 2");
  if (n_per_class < 0) throw ConfigError("n_per_class must be non-negative");
  if (!(separation > 0.0) || !(spread > 0.0)) throw ConfigError("separation and spread must be positive");

  Rng rng = make_rng(seed, {kStreamData});
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd raw(dim, classes);
  for (Eigen::Index c = 0; c < classes; ++c)
    for (Eigen::Index d = 0; d < dim; ++d) raw(d, c) = normal(rng);
  // Orthonormal directions when they fit, so every pair of means sits at
  // separation * sqrt(2).
  Eigen::MatrixXd dirs = raw;
  if (classes <= dim) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, classes);
    dirs = q;
  } else {
    for (Eigen::Index c = 0; c < classes; ++c) dirs.col(c).normalize();
  }

  PseudoLabeledDataset ds;
  ds.classes = classes;
  ds.dim = dim;
  for (int c = 0; c < classes; ++c) ds.means.push_back(separation * dirs.col(c));

  std::vector<LabeledSample> samples;
  samples.reserve(static_cast<std::size_t>(classes) * static_cast<std::size_t>(n_per_class));
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      FeatureVector x(dim);
      for (Eigen::Index d = 0; d < dim; ++d) x[d] = ds.means[static_cast<std::size_t>(c)][d] + spread * normal(rng);
      samples.push_back({0, std::move(x), c});
    }
  }
  std::shuffle(samples.begin(), samples.end(), rng);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].id = static_cast<SampleId>(i);
  ds.samples = std::move(samples);

  std::ostringstream os;
  os << "gaussian-mixture C=" << classes << " n_per_class=" << n_per_class << " D=" << dim
     << " separation=" << separation << " spread=" << spread << " seed=" << seed;
  ds.provenance = os.str();
  return ds;
}

std::vector<int> nearest_class_map(const std::vector<FeatureVector>& means) {
  const int c = static_cast<int>(means.size());
  std::vector<int> map(static_cast<std::size_t>(c), 0);
  for (int i = 0; i < c; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) {
      if (j == i) continue;
      const double d = (means[static_cast<std::size_t>(i)] - means[static_cast<std::size_t>(j)]).squaredNorm();
      if (d < best) {
        best = d;
        map[static_cast<std::size_t>(i)] = j;
      }
    }
  }
  return map;
}

namespace {

std::vector<FeatureVector> empirical_means(const PseudoLabeledDataset& ds) {
  std::vector<FeatureVector> means(static_cast<std::size_t>(ds.classes), FeatureVector::Zero(ds.dim));
  std::vector<int> counts(static_cast<std::size_t>(ds.classes), 0);
  for (const auto& s : ds.samples) {
    means[static_cast<std::size_t>(s.gt)] += s.x;
    ++counts[static_cast<std::size_t>(s.gt)];
  }
  for (std::size_t c = 0; c < means.size(); ++c)
    if (counts[c] > 0) means[c] /= counts[c];
  return means;
}

ProbVector render(int cls, int classes, const NoiseModel& model, Rng& rng) {
  switch (model.profile) {
    case ConfidenceProfile::onehot:
      return onehot(cls, classes);
    case ConfidenceProfile::overconfident: {
      double peak = model.peak;
      if (model.peak_jitter > 0.0) {
        std::uniform_real_distribution<double> u(model.peak - model.peak_jitter, model.peak + model.peak_jitter);
        peak = std::min(1.0, u(rng));
      }
      ProbVector p = ProbVector::Constant(classes, (1.0 - peak) / (classes - 1));
      p[cls] = peak;
      return p;
    }
    case ConfidenceProfile::tempered: {
      Eigen::VectorXd logits = Eigen::VectorXd::Zero(classes);
      logits[cls] = 1.0 / model.temperature;
      return softmax_columns(logits).col(0);
    }
  }
  return onehot(cls, classes);
}

}  // namespace

PseudoLabeledDataset apply_noise(const PseudoLabeledDataset& dataset, const NoiseModel& model,
                                 std::uint64_t seed) {
  model.validate(dataset.classes);
  PseudoLabeledDataset out = dataset;
  const std::size_t n = dataset.samples.size();
  Rng rng = make_rng(seed, {kStreamNoise});

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_corrupt = static_cast<std::size_t>(std::llround(model.rate * static_cast<double>(n)));
  std::vector<bool> corrupt(n, false);
  for (std::size_t i = 0; i < n_corrupt && i < n; ++i) corrupt[order[i]] = true;

  const auto means = dataset.means.size() == static_cast<std::size_t>(dataset.classes)
                         ? dataset.means
                         : empirical_means(dataset);
  const auto neighbor = nearest_class_map(means);
  std::uniform_int_distribution<int> other(0, dataset.classes - 2);

  out.pseudo_labels.clear();
  out.pseudo_labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int gt = dataset.samples[i].gt;
    int cls = gt;
    if (corrupt[i]) {
      if (model.corruption == Corruption::neighbor_flip) {
        cls = neighbor[static_cast<std::size_t>(gt)];
      } else {
        cls = other(rng);
        if (cls >= gt) ++cls;
      }
    }
    out.pseudo_labels.push_back(render(cls, dataset.classes, model, rng));
  }
  out.provenance = dataset.provenance + "; noise " + model.describe() + " seed=" + std::to_string(seed);
  return out;
}

EmbeddingProvider EmbeddingProvider::identity(int dim) {
  EmbeddingProvider p;
  p.mode_ = Mode::identity;
  p.input_dim_ = dim;
  p.output_dim_ = dim;
  return p;
}

EmbeddingProvider EmbeddingProvider::random_projection(int in_dim, int out_dim, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("projection dims must be positive");
  EmbeddingProvider p;
  p.mode_ = Mode::random_projection;
  p.input_dim_ = in_dim;
  p.output_dim_ = out_dim;
  Rng rng = make_rng(seed, {kStreamProjection});
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(out_dim)));
  p.projection_.resize(out_dim, in_dim);
  for (Eigen::Index r = 0; r < out_dim; ++r)
    for (Eigen::Index c = 0; c < in_dim; ++c) p.projection_(r, c) = normal(rng);
  return p;
}

EmbeddingProvider EmbeddingProvider::trained_encoder(ClassifierNet net) {
  EmbeddingProvider p;
  p.mode_ = Mode::trained_encoder;
  p.input_dim_ = net.input_dim();
  p.output_dim_ = net.layer_count() > 1 ? static_cast<int>(net.layers()[net.layers().size() - 2].weight.rows())
                                        : net.input_dim();
  p.encoder_ = std::move(net);
  return p;
}

EmbeddingVector EmbeddingProvider::embed(const FeatureVector& x) const {
  return embed_batch(x).col(0);
}

Eigen::MatrixXd EmbeddingProvider::embed_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim_)
    throw ShapeError("embedding expects " + std::to_string(input_dim_) + " features, got " +
                     std::to_string(inputs.rows()));
  switch (mode_) {
    case Mode::identity: return inputs;
    case Mode::random_projection: return projection_ * inputs;
    case Mode::trained_encoder: return encoder_->hidden_features(inputs);
  }
  return inputs;
}

namespace {

void append_real(std::string& out, double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

class TextCursor {
 public:
  explicit TextCursor(const std::string& text) : text_(text) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= text_.size(); }

  void expect_literal(std::string_view lit) {
    if (text_.compare(pos_, lit.size(), lit) != 0)
      throw ParseError("expected '" + std::string(lit) + "'", pos_);
    pos_ += lit.size();
  }

  void skip_spaces() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  void expect_newline() {
    skip_spaces();
    if (pos_ < text_.size() && text_[pos_] == '\r') ++pos_;
    if (pos_ >= text_.size() || text_[pos_] != '\n') throw ParseError("expected end of line", pos_);
    ++pos_;
  }

  template <typename T>
  T number() {
    skip_spaces();
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    T value{};
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) throw ParseError("expected a number", pos_);
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format_dataset(const PseudoLabeledDataset& ds) {
  if (!ds.samples.empty() && !ds.has_pseudo_labels())
    throw ConfigError("dataset has no pseudo-labels to save");
  std::string out = "RUCDS v1 C=" + std::to_string(ds.classes) + " D=" + std::to_string(ds.dim) +
                    " N=" + std::to_string(ds.samples.size()) + "\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    out += std::to_string(s.id);
    out += ' ';
    out += std::to_string(s.gt);
    for (Eigen::Index d = 0; d < s.x.size(); ++d) {
      out += ' ';
      append_real(out, s.x[d]);
    }
    for (Eigen::Index c = 0; c < ds.pseudo_labels[i].size(); ++c) {
      out += ' ';
      append_real(out, ds.pseudo_labels[i][c]);
    }
    out += '\n';
  }
  return out;
}

PseudoLabeledDataset parse_dataset(const std::string& text) {
  TextCursor cur(text);
  PseudoLabeledDataset ds;
  cur.expect_literal("RUCDS v1 C=");
  const std::size_t header_pos = cur.pos();
  ds.classes = cur.number<int>();
  cur.expect_literal(" D=");
  ds.dim = cur.number<int>();
  cur.expect_literal(" N=");
  const auto n = cur.number<long long>();
  if (ds.classes < 2 || ds.dim < 1 || n < 0) throw ParseError("invalid header dimensions", header_pos);
  cur.expect_newline();
  ds.samples.reserve(static_cast<std::size_t>(n));
  ds.pseudo_labels.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const std::size_t line_pos = cur.pos();
    if (cur.at_end()) throw ParseError("file ends after " + std::to_string(i) + " of " + std::to_string(n) + " samples", line_pos);
    LabeledSample s;
    s.id = cur.number<SampleId>();
    const std::size_t gt_pos = cur.pos();
    s.gt = cur.number<int>();
    if (s.gt < 0 || s.gt >= ds.classes) throw ParseError("ground-truth class out of range", gt_pos);
    s.x.resize(ds.dim);
    for (int d = 0; d < ds.dim; ++d) s.x[d] = cur.number<double>();
    ProbVector y(ds.classes);
    for (int c = 0; c < ds.classes; ++c) y[c] = cur.number<double>();
    if (!s.x.allFinite()) throw ParseError("non-finite feature", line_pos);
    if (!is_prob_vector(y, 1e-6)) throw ParseError("pseudo-label is not a probability vector", line_pos);
    cur.expect_newline();
    ds.samples.push_back(std::move(s));
    ds.pseudo_labels.push_back(std::move(y));
  }
  cur.skip_spaces();
  if (!cur.at_end()) throw ParseError("trailing data after last sample", cur.pos());
  return ds;
}

void save_dataset(const PseudoLabeledDataset& dataset, const std::filesystem::path& path) {
  const std::string text = format_dataset(dataset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PseudoLabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  PseudoLabeledDataset ds = parse_dataset(buf.str());
  ds.provenance = "file " + path.string();
  return ds;
}

}  // namespace ruc
