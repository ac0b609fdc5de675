#pragma once

// Reference implementations used only as test oracles. They are written with
// plain loops and share no code with the library beyond its data types.

#include "ruc/network.hpp"
#include "ruc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

inline std::vector<double> naive_probs(const ruc::ClassifierNet& net, const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& W = layers[l].weight;
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      double s = layers[l].bias(i);
      for (Eigen::Index j = 0; j < W.cols(); ++j) s += W(i, j) * a[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = s;
    }
    if (l + 1 < layers.size()) {
      for (double& v : z) {
        switch (net.activations()[l]) {
          case ruc::Activation::relu: v = v > 0.0 ? v : 0.0; break;
          case ruc::Activation::tanh: v = std::tanh(v); break;
          case ruc::Activation::identity: break;
        }
      }
    }
    a = std::move(z);
  }
  const double m = *std::max_element(a.begin(), a.end());
  double sum = 0.0;
  for (double& v : a) sum += (v = std::exp(v - m));
  for (double& v : a) v /= sum;
  return a;
}

inline double naive_loss(const ruc::ClassifierNet& net, const ruc::LossSpec& spec) {
  double total = 0.0;
  for (const auto& term : spec) {
    const auto n = term.inputs.cols();
    if (n == 0) continue;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto p = naive_probs(net, term.inputs.col(j));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double t = term.targets(static_cast<Eigen::Index>(i), j);
        if (term.kind == ruc::LossKind::cross_entropy)
          acc -= t == 0.0 ? 0.0 : t * std::log(p[i]);
        else
          acc += (t - p[i]) * (t - p[i]);
      }
    }
    total += term.weight * acc / static_cast<double>(n);
  }
  return total;
}

/// Central differences of naive_loss with respect to every parameter.
inline ruc::GradientSet fd_gradients(const ruc::ClassifierNet& net, const ruc::LossSpec& spec, double h = 1e-5) {
  ruc::ClassifierNet probe = net;
  ruc::GradientSet g = ruc::GradientSet::zeros_like(net);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto bump = [&](double& param, double& out) {
      const double keep = param;
      param = keep + h;
      const double up = naive_loss(probe, spec);
      param = keep - h;
      const double down = naive_loss(probe, spec);
      param = keep;
      out = (up - down) / (2.0 * h);
    };
    auto& layer = probe.layers()[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) bump(layer.weight.data()[i], g.layers[l].weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) bump(layer.bias.data()[i], g.layers[l].bias.data()[i]);
  }
  return g;
}

/// Per-entry relative error with an absolute floor so that entries whose true
/// value is ~0 are judged on absolute error.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_error(const ruc::GradientSet& a, const ruc::GradientSet& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < a.layers[l].weight.size(); ++i)
      worst = std::max(worst, rel_error(a.layers[l].weight.data()[i], b.layers[l].weight.data()[i]));
    for (Eigen::Index i = 0; i < a.layers[l].bias.size(); ++i)
      worst = std::max(worst, rel_error(a.layers[l].bias.data()[i], b.layers[l].bias.data()[i]));
  }
  return worst;
}

/// Central differences of the per-sample cross-entropy with respect to x.
inline Eigen::VectorXd fd_input_gradient(const ruc::ClassifierNet& net, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& t, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  auto ce = [&](const Eigen::VectorXd& v) {
    const auto p = naive_probs(net, v);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (t(static_cast<Eigen::Index>(i)) != 0.0) s -= t(static_cast<Eigen::Index>(i)) * std::log(p[i]);
    return s;
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd up = x, down = x;
    up(i) += h;
    down(i) -= h;
    g(i) = (ce(up) - ce(down)) / (2.0 * h);
  }
  return g;
}

/// Best total matches over every permutation of C classes.
inline long brute_force_matching(const Eigen::MatrixXi& counts) {
  std::vector<int> perm(static_cast<std::size_t>(counts.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  long best = -1;
  do {
    long s = 0;
    for (std::size_t r = 0; r < perm.size(); ++r) s += counts(static_cast<Eigen::Index>(r), perm[r]);
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Random probability vector drawn from a flat Dirichlet, occasionally
/// degenerate (onehot or with exact zeros).
inline Eigen::VectorXd random_prob(int classes, ruc::Rng& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::uniform_int_distribution<int> mode(0, 9);
  Eigen::VectorXd p(classes);
  const int m = mode(rng);
  if (m == 0) {
    p.setZero();
    p(pick(rng)) = 1.0;
    return p;
  }
  for (int i = 0; i < classes; ++i) p(i) = ex(rng);
  if (m == 1) p(pick(rng)) = 0.0;
  if (p.sum() == 0.0) p(0) = 1.0;
  return p / p.sum();
}

inline ruc::ClassifierNet random_net(int in, const std::vector<int>& hidden, int classes, ruc::Activation act,
                                     ruc::Rng& rng, double bias_scale = 0.3) {
  ruc::ClassifierNet net(in, hidden, classes, act, rng());
  std::normal_distribution<double> n01(0.0, bias_scale);
  for (auto& layer : net.layers())
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = n01(rng);
  return net;
}

}  // namespace oracle
