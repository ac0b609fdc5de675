#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ruc {

using FeatureVector = Eigen::VectorXd;
using EmbeddingVector = Eigen::VectorXd;
/// Length-C non-negative vector summing to 1.
using ProbVector = Eigen::VectorXd;
using SampleId = std::int64_t;

/// Invalid hyper-parameter, dimension or schedule.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared while evaluating a network.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int layer)
      : std::runtime_error(what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// Malformed dataset or checkpoint file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

inline constexpr double kProbTolerance = 1e-9;

/// True when p is non-negative, finite and sums to 1 within tol.
bool is_prob_vector(const ProbVector& p, double tol = kProbTolerance);

/// Index of the largest entry; ties resolve to the lowest index.
int argmax(const Eigen::VectorXd& v);

ProbVector onehot(int cls, int classes);

}  // namespace ruc
