#pragma once

#include "ruc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ruc {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

const char* to_string(Activation a);
Activation parse_activation(const std::string& name);

/// One affine layer; weight is out x in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  bool operator==(const DenseLayer& other) const {
    return weight == other.weight && bias == other.bias;
  }
};

/// Dense feed-forward classifier ending in a softmax. Hidden layers use their
/// own activation, the output layer is always affine + softmax.
class ClassifierNet {
 public:
  ClassifierNet() = default;

  /// Glorot-uniform weights, zero biases, deterministic in `seed`.
  ClassifierNet(int input_dim, const std::vector<int>& hidden, int classes,
                Activation activation, std::uint64_t seed);

  /// Takes ownership of explicit layers. `activations` has one entry per
  /// hidden layer (layers.size() - 1).
  ClassifierNet(std::vector<DenseLayer> layers, std::vector<Activation> activations);

  int input_dim() const;
  int classes() const;
  int layer_count() const { return static_cast<int>(layers_.size()); }
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<Activation>& activations() const { return activations_; }

  ProbVector forward(const FeatureVector& x) const;
  /// Column-per-sample batch; returns C x N probabilities.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd logits_batch(const Eigen::MatrixXd& inputs) const;
  /// Activations of the last hidden layer (inputs unchanged for a 1-layer net).
  Eigen::MatrixXd hidden_features(const Eigen::MatrixXd& inputs) const;

  bool operator==(const ClassifierNet& other) const {
    return layers_ == other.layers_ && activations_ == other.activations_;
  }

 private:
  std::vector<DenseLayer> layers_;
  std::vector<Activation> activations_;
};

/// Row-wise numerically stable softmax over the columns of `logits`.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

enum class LossKind { cross_entropy, squared_error };

/// weight * mean over columns of loss(targets_j, f(inputs_j)).
/// cross_entropy is H(t, p) = -sum t log p; squared_error is ||t - p||^2.
struct LossTerm {
  LossKind kind = LossKind::cross_entropy;
  Eigen::MatrixXd inputs;   // D x N
  Eigen::MatrixXd targets;  // C x N
  double weight = 1.0;
};

using LossSpec = std::vector<LossTerm>;

struct GradientSet {
  std::vector<DenseLayer> layers;

  static GradientSet zeros_like(const ClassifierNet& net);
  bool all_zero() const;
};

struct LossAndGradient {
  double loss = 0.0;
  GradientSet gradients;
};

/// Exact backpropagated gradient of the summed loss terms.
LossAndGradient loss_and_gradients(const ClassifierNet& net, const LossSpec& spec);
GradientSet gradients(const ClassifierNet& net, const LossSpec& spec);
double evaluate_loss(const ClassifierNet& net, const LossSpec& spec);

/// d/dx of the per-sample cross-entropy H(t_j, f(x_j)), one column per sample.
Eigen::MatrixXd input_gradients(const ClassifierNet& net, const Eigen::MatrixXd& inputs,
                                const Eigen::MatrixXd& targets);

struct OptimizerState {
  std::vector<DenseLayer> velocity;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double base_lr = 0.01;
  double learning_rate = 0.01;
  int epoch = 0;

  static OptimizerState for_net(const ClassifierNet& net, double momentum,
                                double weight_decay, double base_lr);
};

/// v <- mu * v + (g + wd * theta); theta <- theta - lr * v.
void sgd_step(ClassifierNet& net, OptimizerState& state, const GradientSet& grads);

/// lr0 * (1 + cos(pi * epoch / total_epochs)) / 2.
double cosine_lr(int epoch, int total_epochs, double lr0);

/// Redraws the output layer (Glorot-uniform weights, zero bias). Earlier
/// layers are left untouched.
void reinit_final_layer(ClassifierNet& net, std::uint64_t seed);

void save_net(const ClassifierNet& net, const std::filesystem::path& path);
ClassifierNet load_net(const std::filesystem::path& path);

}  // namespace ruc
