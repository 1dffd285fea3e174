#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fanet/error.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/nn/grad_check.hpp"
#include "fanet/nn/network.hpp"
#include "fanet/nn/sgd.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace fanet;
using namespace fanet::nn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// 0.5 * ||output - target||^2
OutputLoss squared_loss(MatrixXd target) {
  return [target](const MatrixXd& out, MatrixXd* grad) {
    const MatrixXd diff = out - target;
    if (grad) *grad = diff;
    return 0.5 * diff.squaredNorm();
  };
}

template <typename L>
void randomize(L& layer, std::mt19937_64& rng) {
  initialize(layer, rng);
  std::normal_distribution<double> n(0.0, 0.1);
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = n(rng);
}

}  // namespace

TEST_CASE("identity dense layer passes input through") {
  DenseLayer l(2, 2, Activation::Identity);
  l.weights.setIdentity();
  Network net({l});
  MatrixXd x(2, 1);
  x << 0.3, 0.7;
  const MatrixXd y = forward(net, x).output();
  CHECK(y(0, 0) == 0.3);
  CHECK(y(1, 0) == 0.7);
}

TEST_CASE("sigmoid dense layer evaluates sigmoid(1)") {
  DenseLayer l(2, 1, Activation::Sigmoid);
  l.weights << 1, 1;
  l.bias << -1;
  Network net({l});
  const MatrixXd y = forward(net, MatrixXd::Ones(2, 1)).output();
  CHECK(y(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(y(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("all-ones 3x3 convolution sums the patch") {
  ConvLayer c(1, 3, 3, 1, 3, 1, 0, Activation::Identity);
  c.weights.setOnes();
  Network net({c});
  const MatrixXd y = forward(net, MatrixXd::Ones(9, 1)).output();
  REQUIRE(y.rows() == 1);
  CHECK(y(0, 0) == 9.0);
}

TEST_CASE("conv output geometry follows floor((in + 2 pad - k) / stride) + 1") {
  for (int in = 5; in <= 12; ++in)
    for (int k = 1; k <= 3; k += 2)
      for (int s = 1; s <= 3; ++s)
        for (int p = 0; p <= 1; ++p) {
          ConvLayer c(2, in, in + 1, 3, k, s, p, Activation::Relu);
          CHECK(c.out_height() == (in + 2 * p - k) / s + 1);
          CHECK(c.out_width() == (in + 1 + 2 * p - k) / s + 1);
          std::mt19937_64 rng(1);
          Network net({c});
          CHECK(forward(net, random_matrix(c.input_size(), 2, rng)).output().rows() == c.output_size());
        }
}

TEST_CASE("forward rejects mismatched input") {
  Network net({DenseLayer(3, 2, Activation::Relu)});
  CHECK_THROWS_AS(forward(net, MatrixXd::Zero(4, 1)), Error);
  CHECK_THROWS_AS(net.add(DenseLayer(3, 1, Activation::Identity)), Error);
}

TEST_CASE("forward is pure") {
  std::mt19937_64 rng(3);
  DenseLayer a(5, 4, Activation::Relu), b(4, 2, Activation::Sigmoid);
  randomize(a, rng);
  randomize(b, rng);
  Network net({a, b});
  const MatrixXd x = random_matrix(5, 7, rng);
  const MatrixXd y1 = forward(net, x).output();
  const MatrixXd y2 = forward(net, x).output();
  CHECK(y1 == y2);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  std::mt19937_64 rng(4);
  ConvLayer c(1, 6, 6, 2, 3, 1, 1, Activation::Relu);
  DenseLayer d(c.output_size(), 3, Activation::Sigmoid);
  randomize(c, rng);
  randomize(d, rng);
  Network net({c, d});
  const auto acts = forward(net, random_matrix(36, 2, rng));
  const auto g = backward(net, acts, MatrixXd::Zero(3, 2));
  for (const auto& l : g.layers) {
    CHECK(l.weights.isZero(0.0));
    CHECK(l.bias.isZero(0.0));
  }
}

TEST_CASE("linear layer weight gradient of y equals x transpose") {
  DenseLayer l(3, 1, Activation::Identity);
  l.weights << 0.5, -1.0, 2.0;
  Network net({l});
  MatrixXd x(3, 1);
  x << 0.1, 0.2, -0.3;
  const auto acts = forward(net, x);
  const auto g = backward(net, acts, MatrixXd::Ones(1, 1));
  CHECK(g.layers[0].weights == x.transpose());
  CHECK(g.layers[0].bias(0) == 1.0);
  CHECK(g.input == l.weights.transpose());
}

TEST_CASE("backward rejects stale activations") {
  std::mt19937_64 rng(5);
  DenseLayer l(2, 2, Activation::Relu);
  randomize(l, rng);
  Network net({l});
  const auto acts = forward(net, random_matrix(2, 1, rng));
  std::get<DenseLayer>(net.mutable_layer(0)).weights(0, 0) += 1.0;
  CHECK_THROWS_AS(backward(net, acts, MatrixXd::Ones(2, 1)), Error);

  Network other = net;
  const auto other_acts = forward(other, random_matrix(2, 1, rng));
  CHECK_THROWS_AS(backward(net, other_acts, MatrixXd::Ones(2, 1)), Error);
}

TEST_CASE("random two-layer network matches central differences") {
  std::mt19937_64 rng(11);
  DenseLayer a(6, 5, Activation::Sigmoid), b(5, 3, Activation::Identity);
  randomize(a, rng);
  randomize(b, rng);
  Network net({a, b});
  const MatrixXd x = random_matrix(6, 8, rng);
  const auto r = grad_check(net, squared_loss(random_matrix(3, 8, rng)), x, 1e-4);
  CHECK(r.max_relative_error <= 1e-5);
  CHECK(r.checked == net.parameter_count());
}

TEST_CASE("every layer type matches central differences over 100 trials") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto act = static_cast<Activation>(trial % 3);
    Network net;
    if (trial % 2 == 0) {
      DenseLayer l(4, 3, act);
      randomize(l, rng);
      net.add(l);
    } else {
      ConvLayer c(2, 5, 4, 2, 3, 1 + trial % 3 / 2, 1, act);
      randomize(c, rng);
      net.add(c);
    }
    const MatrixXd x = random_matrix(net.input_size(), 3, rng);
    const auto r = grad_check(net, squared_loss(random_matrix(net.output_size(), 3, rng)), x, 1e-4);
    worst = std::max(worst, r.max_relative_error);
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("grad_check on a linear loss reports no error") {
  std::mt19937_64 rng(7);
  DenseLayer l(3, 2, Activation::Identity);
  randomize(l, rng);
  Network net({l});
  const MatrixXd w = random_matrix(2, 4, rng);
  OutputLoss linear = [w](const MatrixXd& out, MatrixXd* grad) {
    if (grad) *grad = w;
    return (out.array() * w.array()).sum();
  };
  const auto r = grad_check(net, linear, random_matrix(3, 4, rng), 1e-4);
  CHECK(r.max_relative_error <= 1e-10);
}

TEST_CASE("grad_check detects a doubled gradient") {
  std::vector<double> p = {0.3, -1.2, 2.0};
  std::vector<double> analytic(3);
  for (int i = 0; i < 3; ++i) analytic[i] = 2.0 * (2.0 * p[i]);  // true gradient of sum p^2, doubled
  std::vector<ParameterView> views = {{"p", p, analytic}};
  auto loss = [&] { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; };
  const auto before = p;
  const auto r = grad_check(loss, views, {1e-4});
  CHECK(r.max_relative_error == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(p == before);
}

TEST_CASE("sgd update rule") {
  SgdConfig cfg{0.1, 0.0, 0.0, 5.0, 10};
  SUBCASE("zero gradient leaves params unchanged") {
    VectorXd p(2), v = VectorXd::Zero(2);
    p << 1.5, -2.0;
    const VectorXd before = p;
    sgd_step(p, VectorXd::Zero(2), v, cfg, cfg.learning_rate);
    CHECK(p == before);
  }
  SUBCASE("plain gradient step") {
    VectorXd p = VectorXd::Ones(1), v = VectorXd::Zero(1);
    sgd_step(p, VectorXd::Ones(1), v, cfg, 0.1);
    CHECK(p(0) == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("two momentum steps") {
    cfg.momentum = 0.9;
    VectorXd p = VectorXd::Zero(1), v = VectorXd::Zero(1);
    sgd_step(p, VectorXd::Ones(1), v, cfg, 0.1);
    sgd_step(p, VectorXd::Ones(1), v, cfg, 0.1);
    CHECK(p(0) == doctest::Approx(-0.29).epsilon(1e-14));
  }
  SUBCASE("non-finite gradient is a divergence error and mutates nothing") {
    VectorXd p = VectorXd::Ones(2), v = VectorXd::Zero(2), g(2);
    g << 1.0, std::nan("");
    try {
      sgd_step(p, g, v, cfg, 0.1);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Numerical);
    }
    CHECK(p == VectorXd::Ones(2));
  }
}

TEST_CASE("sgd on a quadratic converges monotonically for lr < 1") {
  for (double lr : {0.05, 0.3, 0.7, 0.99}) {
    SgdConfig cfg{lr, 0.0, 0.0, 5.0, 10};
    VectorXd x = VectorXd::Constant(1, 4.0), v = VectorXd::Zero(1);
    const double a = -1.5;
    double prev = 0.5 * (x(0) - a) * (x(0) - a);
    for (int i = 0; i < 50; ++i) {
      sgd_step(x, VectorXd::Constant(1, x(0) - a), v, cfg, lr);
      const double loss = 0.5 * (x(0) - a) * (x(0) - a);
      CHECK(loss <= prev);
      prev = loss;
    }
  }
}

TEST_CASE("learning rate decays by a factor of 5 every 10 epochs") {
  SgdConfig cfg;
  CHECK(learning_rate_at(cfg, 0) == 0.01);
  CHECK(learning_rate_at(cfg, 9) == 0.01);
  CHECK(learning_rate_at(cfg, 10) == doctest::Approx(0.002).epsilon(1e-15));
  CHECK(learning_rate_at(cfg, 25) == doctest::Approx(0.01 / 25).epsilon(1e-15));
  CHECK(learning_rate_at(cfg, 49) == doctest::Approx(0.01 / 625).epsilon(1e-15));
  SgdConfig bad = cfg;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Sgd optimizer steps a whole network") {
  std::mt19937_64 rng(9);
  DenseLayer l(3, 1, Activation::Identity);
  randomize(l, rng);
  Network net({l});
  Sgd opt(SgdConfig{0.1, 0.9, 0.0, 5.0, 10});
  const MatrixXd x = random_matrix(3, 16, rng);
  const MatrixXd target = MatrixXd::Constant(1, 16, 0.5);
  auto loss = squared_loss(target);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 60; ++it) {
    const auto acts = forward(net, x);
    MatrixXd grad;
    const double value = loss(acts.output(), &grad);
    if (it == 0) first = value;
    last = value;
    opt.step(net, backward(net, acts, grad / 16.0), 0);
  }
  CHECK(last < 0.1 * first);
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(12);
  ConvLayer c(1, 8, 8, 3, 3, 2, 1, Activation::Relu);
  DenseLayer d(c.output_size(), 4, Activation::Sigmoid);
  randomize(c, rng);
  randomize(d, rng);
  Checkpoint ckpt;
  ckpt.kind = "test";
  ckpt.meta = {{"note", "has spaces and 100%"}, {"empty", ""}};
  ckpt.networks.emplace_back("tiny net", Network({c, d}));
  VectorXd block(3);
  block << 1.0 / 3.0, -0.0, 1e-300;
  ckpt.blocks.emplace_back("extra", block);

  std::stringstream buf;
  write_checkpoint(buf, ckpt);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "FANETCKP");
  const Checkpoint back = read_checkpoint(buf);
  CHECK(back.kind == "test");
  CHECK(back.meta_value("note") == "has spaces and 100%");
  CHECK(back.meta_value("empty").empty());
  const auto& net = back.network("tiny net");
  const MatrixXd x = random_matrix(64, 2, rng);
  CHECK(forward(net, x).output() == forward(ckpt.networks[0].second, x).output());
  CHECK(std::signbit(back.block("extra")(1)));
  CHECK(back.block("extra") == block);

  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);
}

TEST_CASE("corrupted checkpoints are format errors") {
  Checkpoint ckpt;
  ckpt.kind = "x";
  ckpt.networks.emplace_back("n", Network({DenseLayer(2, 2, Activation::Relu)}));
  std::stringstream buf;
  write_checkpoint(buf, ckpt);
  const std::string bytes = buf.str();

  std::stringstream bad_magic("NOTACKPT" + bytes.substr(8));
  CHECK_THROWS_AS(read_checkpoint(bad_magic), Error);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), Error);
}
