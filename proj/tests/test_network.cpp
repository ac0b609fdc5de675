#include "doctest.h"
#include "oracles.hpp"

#include "ruc/network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace ruc;

namespace {

ClassifierNet linear_net(const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
  return ClassifierNet({DenseLayer{W, b}}, {});
}

}  // namespace

TEST_CASE("forward of an all-zero network is uniform") {
  const ClassifierNet net = linear_net(Eigen::MatrixXd::Zero(5, 3), Eigen::VectorXd::Zero(5));
  const ProbVector p = net.forward(Eigen::Vector3d(1.5, -2.0, 7.0));
  for (int i = 0; i < 5; ++i) CHECK(p(i) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("forward of the identity layer") {
  const ClassifierNet net = linear_net(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
  const ProbVector p0 = net.forward(Eigen::Vector2d(0.0, 0.0));
  CHECK(p0(0) == doctest::Approx(0.5));
  CHECK(p0(1) == doctest::Approx(0.5));
  const ProbVector p1 = net.forward(Eigen::Vector2d(1.0, 0.0));
  const double e = std::exp(1.0);
  CHECK(p1(0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
  CHECK(p1(0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(p1(1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-14));
}

TEST_CASE("forward rejects the wrong input width") {
  const ClassifierNet net(4, {3}, 2, Activation::relu, 1);
  CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("forward output is a probability vector even for huge logits") {
  Rng rng(11);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    const ClassifierNet net = oracle::random_net(6, {8}, 5, Activation::tanh, rng);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = n(rng);
    const ProbVector p = net.forward(x);
    REQUIRE(is_prob_vector(p));
    const auto q = oracle::naive_probs(net, x);
    for (int i = 0; i < 5; ++i) CHECK(p(i) == doctest::Approx(q[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("forward_batch agrees with forward column by column") {
  const ClassifierNet net(3, {4, 4}, 3, Activation::relu, 5);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 7);
  const Eigen::MatrixXd P = net.forward_batch(X);
  for (int j = 0; j < 7; ++j) CHECK((P.col(j) - net.forward(X.col(j))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Glorot initialisation bounds and zero biases") {
  const ClassifierNet net(10, {20}, 4, Activation::relu, 3);
  const double b0 = std::sqrt(6.0 / 30.0);
  const double b1 = std::sqrt(6.0 / 24.0);
  CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= b0);
  CHECK(net.layers()[1].weight.cwiseAbs().maxCoeff() <= b1);
  CHECK(net.layers()[0].bias.isZero(0.0));
  CHECK(net.layers()[1].bias.isZero(0.0));
  CHECK(net.parameter_count() == 10 * 20 + 20 + 20 * 4 + 4);
  CHECK(ClassifierNet(10, {20}, 4, Activation::relu, 3) == net);
  CHECK_FALSE(ClassifierNet(10, {20}, 4, Activation::relu, 4) == net);
}

TEST_CASE("an empty batch has zero gradient") {
  const ClassifierNet net(3, {4}, 2, Activation::relu, 1);
  LossSpec spec{{LossKind::cross_entropy, Eigen::MatrixXd(3, 0), Eigen::MatrixXd(2, 0), 1.0}};
  CHECK(gradients(net, spec).all_zero());
  CHECK(gradients(net, {}).all_zero());
}

TEST_CASE("softmax cross-entropy gradient of one layer is (p - y) x^T") {
  Rng rng(2);
  const ClassifierNet net = oracle::random_net(4, {}, 3, Activation::identity, rng);
  Eigen::VectorXd x(4);
  x << 0.3, -1.2, 0.8, 2.0;
  const Eigen::VectorXd y = onehot(1, 3);
  const auto g = gradients(net, {{LossKind::cross_entropy, x, y, 1.0}});
  const auto p = oracle::naive_probs(net, x);
  Eigen::VectorXd pv(3);
  for (int i = 0; i < 3; ++i) pv(i) = p[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd expect = (pv - y) * x.transpose();
  CHECK((g.layers[0].weight - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((g.layers[0].bias - (pv - y)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(17);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Activation acts[] = {Activation::relu, Activation::tanh, Activation::identity};
  for (int trial = 0; trial < 12; ++trial) {
    const Activation act = acts[trial % 3];
    const ClassifierNet net = oracle::random_net(5, {6, 4}, 3, act, rng);
    auto batch = [&](LossKind kind, double w, int n) {
      LossTerm t{kind, Eigen::MatrixXd(5, n), Eigen::MatrixXd(3, n), w};
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < 5; ++i) t.inputs(i, j) = n01(rng);
        t.targets.col(j) = oracle::random_prob(3, rng);
      }
      return t;
    };
    const LossSpec spec{batch(LossKind::cross_entropy, 1.0, 4), batch(LossKind::squared_error, 3.5, 3)};
    const auto lg = loss_and_gradients(net, spec);
    CHECK(lg.loss == doctest::Approx(oracle::naive_loss(net, spec)).epsilon(1e-12));
    CHECK(oracle::max_rel_error(lg.gradients, oracle::fd_gradients(net, spec)) < 1e-4);
  }
}

TEST_CASE("input gradients match central differences") {
  Rng rng(23);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const ClassifierNet net = oracle::random_net(4, {5}, 3, Activation::tanh, rng);
    Eigen::MatrixXd X(4, 3), T(3, 3);
    for (int j = 0; j < 3; ++j) {
      for (int i = 0; i < 4; ++i) X(i, j) = n01(rng);
      T.col(j) = oracle::random_prob(3, rng);
    }
    const Eigen::MatrixXd G = input_gradients(net, X, T);
    for (int j = 0; j < 3; ++j) {
      const Eigen::VectorXd fd = oracle::fd_input_gradient(net, X.col(j), T.col(j));
      for (int i = 0; i < 4; ++i) CHECK(oracle::rel_error(G(i, j), fd(i)) < 1e-4);
    }
  }
}

TEST_CASE("non-finite values report the layer") {
  ClassifierNet net(3, {4}, 2, Activation::relu, 1);
  net.layers()[1].weight(0, 0) = std::numeric_limits<double>::infinity();
  try {
    (void)net.forward(Eigen::Vector3d(1.0, 1.0, 1.0));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.layer() == 1);
  }
}

TEST_CASE("sgd_step") {
  auto scalar_net = [](double theta) {
    Eigen::MatrixXd W(2, 1);
    W << theta, 0.0;
    return ClassifierNet({DenseLayer{W, Eigen::Vector2d::Zero()}}, {});
  };
  auto scalar_grad = [](const ClassifierNet& net, double g) {
    GradientSet gs = GradientSet::zeros_like(net);
    gs.layers[0].weight(0, 0) = g;
    return gs;
  };

  SUBCASE("plain gradient descent") {
    ClassifierNet net = scalar_net(0.7);
    auto st = OptimizerState::for_net(net, 0.0, 0.0, 1.0);
    sgd_step(net, st, scalar_grad(net, 0.25));
    CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(0.45));
  }
  SUBCASE("zero gradient, no decay, no velocity leaves parameters alone") {
    ClassifierNet net(3, {4}, 2, Activation::relu, 9);
    const ClassifierNet before = net;
    auto st = OptimizerState::for_net(net, 0.9, 0.0, 0.1);
    sgd_step(net, st, GradientSet::zeros_like(net));
    CHECK(net == before);
  }
  SUBCASE("hand-evaluated momentum and decay") {
    ClassifierNet net = scalar_net(1.0);
    auto st = OptimizerState::for_net(net, 0.9, 0.0005, 0.01);
    sgd_step(net, st, scalar_grad(net, 0.1));
    CHECK(st.velocity[0].weight(0, 0) == doctest::Approx(0.1005).epsilon(1e-12));
    CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(0.998995).epsilon(1e-12));
  }
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 50, 0.1) == 0.1);
  CHECK(cosine_lr(50, 50, 0.1) == 0.0);
  CHECK(cosine_lr(25, 50, 0.1) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.1), ConfigError);
  CHECK_THROWS_AS(cosine_lr(51, 50, 0.1), ConfigError);
}

TEST_CASE("reinit_final_layer") {
  SUBCASE("one layer: everything is redrawn") {
    ClassifierNet net(4, {}, 3, Activation::relu, 1);
    const ClassifierNet before = net;
    reinit_final_layer(net, 99);
    CHECK(net.layers()[0].weight != before.layers()[0].weight);
  }
  SUBCASE("two layers: first layer untouched") {
    ClassifierNet net(4, {5}, 3, Activation::relu, 1);
    const ClassifierNet before = net;
    reinit_final_layer(net, 99);
    CHECK(net.layers()[0] == before.layers()[0]);
    CHECK_FALSE(net.layers()[1] == before.layers()[1]);
  }
  SUBCASE("deterministic in the seed") {
    ClassifierNet a(4, {5}, 3, Activation::relu, 1), b = a;
    reinit_final_layer(a, 7);
    reinit_final_layer(b, 7);
    CHECK(a == b);
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "ruc_test_network";
  std::filesystem::create_directories(dir);
  const ClassifierNet net(6, {7, 5}, 4, Activation::tanh, 42);
  save_net(net, dir / "a.net");
  CHECK(load_net(dir / "a.net") == net);

  const auto size = std::filesystem::file_size(dir / "a.net");
  std::filesystem::copy_file(dir / "a.net", dir / "b.net", std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "b.net", size - 3);
  CHECK_THROWS_AS(load_net(dir / "b.net"), ParseError);

  {
    std::ofstream out(dir / "c.net", std::ios::binary);
    std::ifstream in(dir / "a.net", std::ios::binary);
    out << in.rdbuf() << 'x';
  }
  CHECK_THROWS_AS(load_net(dir / "c.net"), ParseError);
  std::filesystem::remove_all(dir);
}
