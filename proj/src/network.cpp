#include "ruc/network.hpp"

#include "ruc/rng.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace ruc {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

void glorot_fill(DenseLayer& layer, Rng& rng) {
  const auto fan_out = static_cast<double>(layer.weight.rows());
  const auto fan_in = static_cast<double>(layer.weight.cols());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
  layer.bias.setZero();
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
  }
  return z;
}

// dL/dz given dL/da and the pre-activation z.
Eigen::MatrixXd activate_backward(const Eigen::MatrixXd& grad_out, const Eigen::MatrixXd& z,
                                  const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::relu:
      return (z.array() > 0.0).select(grad_out, 0.0);
    case Activation::tanh:
      return (grad_out.array() * (1.0 - a.array().square())).matrix();
    case Activation::identity:
      return grad_out;
  }
  return grad_out;
}

void require_finite(const Eigen::MatrixXd& m, int layer, const char* what) {
  if (!m.allFinite())
    throw NumericError(std::string("non-finite ") + what + " in layer " + std::to_string(layer),
                       layer);
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;   // z per layer
  std::vector<Eigen::MatrixXd> post;  // a per layer, post[0] = input
  Eigen::MatrixXd probs;
  Eigen::MatrixXd log_probs;
};

ForwardCache forward_cached(const ClassifierNet& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim())
    throw ShapeError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                     std::to_string(net.input_dim()));
  ForwardCache cache;
  const auto& layers = net.layers();
  cache.post.push_back(inputs);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * cache.post.back();
    z.colwise() += layers[l].bias;
    require_finite(z, static_cast<int>(l), "pre-activation");
    cache.pre.push_back(z);
    if (l + 1 < layers.size()) cache.post.push_back(activate(z, net.activations()[l]));
  }
  const Eigen::MatrixXd& logits = cache.pre.back();
  Eigen::RowVectorXd lse = logits.colwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.rowwise() - lse;
  Eigen::RowVectorXd log_norm = shifted.array().exp().colwise().sum().log().matrix();
  cache.log_probs = shifted.rowwise() - log_norm;
  cache.probs = cache.log_probs.array().exp().matrix();
  return cache;
}

// Gradient of one loss term with respect to the logits, already scaled by
// weight / N. Also returns the term's contribution to the loss.
double output_gradient(const LossTerm& term, const ForwardCache& cache, Eigen::MatrixXd& dz) {
  const auto n = term.inputs.cols();
  const double scale = term.weight / static_cast<double>(n);
  const Eigen::MatrixXd& p = cache.probs;
  double loss = 0.0;
  if (term.kind == LossKind::cross_entropy) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        if (term.targets(i, j) != 0.0) loss -= term.targets(i, j) * cache.log_probs(i, j);
    // d/dz of -sum t log softmax(z) is p * sum(t) - t.
    Eigen::RowVectorXd mass = term.targets.colwise().sum();
    dz = (p.array().rowwise() * mass.array()).matrix() - term.targets;
  } else {
    Eigen::MatrixXd diff = p - term.targets;
    loss = diff.squaredNorm();
    Eigen::MatrixXd g = 2.0 * diff;
    Eigen::RowVectorXd inner = (p.array() * g.array()).colwise().sum();
    dz = (p.array() * (g.rowwise() - inner).array()).matrix();
  }
  dz *= scale;
  return loss * scale;
}

}  // namespace

ClassifierNet::ClassifierNet(int input_dim, const std::vector<int>& hidden, int classes,
                             Activation activation, std::uint64_t seed) {
  if (input_dim < 1 || classes < 2) throw ConfigError("network needs input_dim >= 1 and classes >= 2");
  int prev = input_dim;
  std::vector<int> widths = hidden;
  widths.push_back(classes);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] < 1) throw ConfigError("hidden width must be positive");
    DenseLayer layer{Eigen::MatrixXd(widths[l], prev), Eigen::VectorXd(widths[l])};
    Rng rng = make_rng(seed, {kStreamInit, l});
    glorot_fill(layer, rng);
    layers_.push_back(std::move(layer));
    prev = widths[l];
  }
  activations_.assign(hidden.size(), activation);
}

ClassifierNet::ClassifierNet(std::vector<DenseLayer> layers, std::vector<Activation> activations)
    : layers_(std::move(layers)), activations_(std::move(activations)) {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  if (activations_.size() + 1 != layers_.size())
    throw ConfigError("need one activation per hidden layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows())
      throw ShapeError("bias length does not match weight rows in layer " + std::to_string(l));
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())
      throw ShapeError("layer " + std::to_string(l) + " input width mismatch");
  }
}

int ClassifierNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int ClassifierNet::classes() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t ClassifierNet::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers_) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

ProbVector ClassifierNet::forward(const FeatureVector& x) const {
  return forward_batch(x).col(0);
}

Eigen::MatrixXd ClassifierNet::forward_batch(const Eigen::MatrixXd& inputs) const {
  return forward_cached(*this, inputs).probs;
}

Eigen::MatrixXd ClassifierNet::logits_batch(const Eigen::MatrixXd& inputs) const {
  return forward_cached(*this, inputs).pre.back();
}

Eigen::MatrixXd ClassifierNet::hidden_features(const Eigen::MatrixXd& inputs) const {
  return forward_cached(*this, inputs).post.back();
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::RowVectorXd top = logits.colwise().maxCoeff();
  Eigen::MatrixXd e = (logits.rowwise() - top).array().exp().matrix();
  Eigen::RowVectorXd norm = e.colwise().sum();
  return (e.array().rowwise() / norm.array()).matrix();
}

GradientSet GradientSet::zeros_like(const ClassifierNet& net) {
  GradientSet g;
  for (const auto& l : net.layers())
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

bool GradientSet::all_zero() const {
  for (const auto& l : layers)
    if (!l.weight.isZero(0.0) || !l.bias.isZero(0.0)) return false;
  return true;
}

LossAndGradient loss_and_gradients(const ClassifierNet& net, const LossSpec& spec) {
  LossAndGradient out{0.0, GradientSet::zeros_like(net)};
  const auto& layers = net.layers();
  for (const auto& term : spec) {
    if (term.inputs.cols() == 0) continue;
    if (term.targets.cols() != term.inputs.cols() || term.targets.rows() != net.classes())
      throw ShapeError("loss targets do not match inputs / class count");
    ForwardCache cache = forward_cached(net, term.inputs);
    Eigen::MatrixXd dz;
    out.loss += output_gradient(term, cache, dz);
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
      auto& g = out.gradients.layers[static_cast<std::size_t>(l)];
      g.weight.noalias() += dz * cache.post[static_cast<std::size_t>(l)].transpose();
      g.bias += dz.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd da = layers[static_cast<std::size_t>(l)].weight.transpose() * dz;
      const auto prev = static_cast<std::size_t>(l - 1);
      dz = activate_backward(da, cache.pre[prev], cache.post[prev + 1], net.activations()[prev]);
    }
  }
  for (std::size_t l = 0; l < out.gradients.layers.size(); ++l) {
    require_finite(out.gradients.layers[l].weight, static_cast<int>(l), "weight gradient");
    require_finite(out.gradients.layers[l].bias, static_cast<int>(l), "bias gradient");
  }
  return out;
}

GradientSet gradients(const ClassifierNet& net, const LossSpec& spec) {
  return loss_and_gradients(net, spec).gradients;
}

double evaluate_loss(const ClassifierNet& net, const LossSpec& spec) {
  double loss = 0.0;
  for (const auto& term : spec) {
    if (term.inputs.cols() == 0) continue;
    ForwardCache cache = forward_cached(net, term.inputs);
    Eigen::MatrixXd dz;
    loss += output_gradient(term, cache, dz);
  }
  return loss;
}

Eigen::MatrixXd input_gradients(const ClassifierNet& net, const Eigen::MatrixXd& inputs,
                                const Eigen::MatrixXd& targets) {
  if (targets.cols() != inputs.cols() || targets.rows() != net.classes())
    throw ShapeError("attack targets do not match inputs / class count");
  const auto& layers = net.layers();
  ForwardCache cache = forward_cached(net, inputs);
  Eigen::RowVectorXd mass = targets.colwise().sum();
  Eigen::MatrixXd dz = (cache.probs.array().rowwise() * mass.array()).matrix() - targets;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    Eigen::MatrixXd da = layers[static_cast<std::size_t>(l)].weight.transpose() * dz;
    if (l == 0) return da;
    const auto prev = static_cast<std::size_t>(l - 1);
    dz = activate_backward(da, cache.pre[prev], cache.post[prev + 1], net.activations()[prev]);
  }
  return Eigen::MatrixXd::Zero(inputs.rows(), inputs.cols());
}

OptimizerState OptimizerState::for_net(const ClassifierNet& net, double momentum,
                                       double weight_decay, double base_lr) {
  OptimizerState s;
  s.velocity = GradientSet::zeros_like(net).layers;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.base_lr = base_lr;
  s.learning_rate = base_lr;
  return s;
}

void sgd_step(ClassifierNet& net, OptimizerState& state, const GradientSet& grads) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size() || state.velocity.size() != layers.size())
    throw ShapeError("optimizer / gradient layer count does not match network");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& p = layers[l];
    auto& v = state.velocity[l];
    const auto& g = grads.layers[l];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        v.weight.rows() != p.weight.rows() || v.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size() || v.bias.size() != p.bias.size())
      throw ShapeError("shape mismatch in layer " + std::to_string(l));
    v.weight = state.momentum * v.weight + (g.weight + state.weight_decay * p.weight);
    v.bias = state.momentum * v.bias + (g.bias + state.weight_decay * p.bias);
    p.weight -= state.learning_rate * v.weight;
    p.bias -= state.learning_rate * v.bias;
  }
}

double cosine_lr(int epoch, int total_epochs, double lr0) {
  if (total_epochs <= 0) throw ConfigError("cosine schedule needs total_epochs > 0");
  if (epoch < 0 || epoch > total_epochs) throw ConfigError("epoch outside [0, total_epochs]");
  if (epoch == total_epochs) return 0.0;
  return lr0 * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs)) / 2.0;
}

void reinit_final_layer(ClassifierNet& net, std::uint64_t seed) {
  if (net.layers().empty()) throw ConfigError("network has no layers");
  const auto last = net.layers().size() - 1;
  Rng rng = make_rng(seed, {kStreamInit, last});
  glorot_fill(net.layers()[last], rng);
}

// .net layout, all integers u64 and all reals f64, little-endian:
//   "RUCNET01" | layer_count | per layer: in, out, activation | weights
// Weights follow layer by layer: weight row-major, then bias.
namespace {

constexpr std::array<char, 8> kNetMagic{'R', 'U', 'C', 'N', 'E', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t u64() {
    if (pos_ + 8 > bytes_.size()) throw ParseError("truncated network checkpoint", pos_);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const unsigned char* data() const { return bytes_.data(); }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_net(const ClassifierNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kNetMagic.data(), kNetMagic.size());
  put_u64(out, static_cast<std::uint64_t>(net.layer_count()));
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers()[static_cast<std::size_t>(l)];
    put_u64(out, static_cast<std::uint64_t>(layer.weight.cols()));
    put_u64(out, static_cast<std::uint64_t>(layer.weight.rows()));
    const bool hidden = l + 1 < net.layer_count();
    put_u64(out, hidden ? static_cast<std::uint64_t>(net.activations()[static_cast<std::size_t>(l)]) : 0);
  }
  for (const auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_f64(out, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f64(out, layer.bias[r]);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ClassifierNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(std::move(bytes));
  if (r.size() < kNetMagic.size() || std::memcmp(r.data(), kNetMagic.data(), kNetMagic.size()) != 0)
    throw ParseError("not a network checkpoint", 0);
  r.skip(kNetMagic.size());
  const std::uint64_t count = r.u64();
  if (count == 0 || count > 1024) throw ParseError("implausible layer count", r.pos() - 8);
  std::vector<DenseLayer> layers;
  std::vector<Activation> acts;
  for (std::uint64_t l = 0; l < count; ++l) {
    const auto in_dim = r.u64();
    const auto out_dim = r.u64();
    const auto act = r.u64();
    if (in_dim == 0 || out_dim == 0 || in_dim > (1u << 20) || out_dim > (1u << 20))
      throw ParseError("implausible layer shape", r.pos() - 24);
    if (act > 2) throw ParseError("unknown activation code", r.pos() - 8);
    layers.push_back({Eigen::MatrixXd(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim)),
                      Eigen::VectorXd(static_cast<Eigen::Index>(out_dim))});
    if (l + 1 < count) acts.push_back(static_cast<Activation>(act));
  }
  for (auto& layer : layers) {
    for (Eigen::Index rr = 0; rr < layer.weight.rows(); ++rr)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(rr, c) = r.f64();
    for (Eigen::Index rr = 0; rr < layer.bias.size(); ++rr) layer.bias[rr] = r.f64();
  }
  if (r.pos() != r.size()) throw ParseError("trailing bytes after network checkpoint", r.pos());
  try {
    return ClassifierNet(std::move(layers), std::move(acts));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), 8);
  }
}

}  // namespace ruc
