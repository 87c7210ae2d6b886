#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "fescycle/error.hpp"
#include "fescycle/nnet.hpp"
#include "support/gradcheck.hpp"

using namespace fes;
using namespace fes::nnet;

namespace {

Layer layer(Eigen::MatrixXd w, Eigen::VectorXd b, Activation act) {
  return Layer{std::move(w), std::move(b), act};
}

DenseNet scalar_sigmoid(double w, double b) {
  Eigen::MatrixXd W(1, 1);
  W << w;
  Eigen::VectorXd B(1);
  B << b;
  return DenseNet({layer(W, B, Activation::Sigmoid)});
}

DenseNet random_net(std::span<const int> dims, Activation out, std::uint64_t seed,
                    double final_range = 0.5) {
  std::mt19937_64 rng(seed);
  return DenseNet::create(dims, Activation::Relu, out, rng, final_range);
}

} // namespace

TEST_CASE("forward examples") {
  DenseNet zero({layer(Eigen::MatrixXd::Zero(6, 9), Eigen::VectorXd::Zero(6),
                       Activation::Sigmoid)});
  const auto y = zero.forward(Eigen::VectorXd::Random(9));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    CHECK(y(i) == 0.5);
  }

  DenseNet identity({layer(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4),
                           Activation::Identity)});
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
  CHECK(identity.forward(x) == x);

  Eigen::MatrixXd w(1, 1);
  w << -1.0;
  Eigen::VectorXd b(1);
  b << 0.5;
  DenseNet relu({layer(w, b, Activation::Relu)});
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK(relu.forward(one)(0) == 0.0);
}

TEST_CASE("sigmoid head stays in the open unit interval") {
  const std::array dims{9, 250, 250, 6};
  const auto net = random_net(dims, Activation::Sigmoid, 1, 3.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01(0.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(9);
    for (auto &v : x) {
      v = n01(rng);
    }
    const auto y = net.forward(x);
    CHECK(y.minCoeff() > 0.0);
    CHECK(y.maxCoeff() < 1.0);
  }
}

TEST_CASE("forward rejects a wrong input width") {
  const std::array dims{8, 16, 6};
  const auto net = random_net(dims, Activation::Sigmoid, 3);
  CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(9)), ContractError);
}

TEST_CASE("layer dimensions must chain") {
  CHECK_THROWS_AS(DenseNet({layer(Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3),
                                  Activation::Relu),
                            layer(Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1),
                                  Activation::Identity)}),
                  ContractError);
}

TEST_CASE("batched forward matches per-sample forward") {
  const std::array dims{15, 32, 32, 1};
  const auto net = random_net(dims, Activation::Identity, 4);
  const Eigen::MatrixXd xs = Eigen::MatrixXd::Random(15, 7);
  const auto ys = net.forward_batch(xs);
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    CHECK(ys(0, j) == doctest::Approx(net.forward(xs.col(j))(0)).epsilon(1e-12));
  }
}

TEST_CASE("backward examples") {
  const std::array dims{8, 20, 20, 6};
  const auto net = random_net(dims, Activation::Sigmoid, 5);
  const auto zero = net.backward(Eigen::VectorXd::Random(8), Eigen::VectorXd::Zero(6));
  CHECK(zero.squared_norm() == 0.0);
  CHECK(zero.input.isZero(0.0));

  const auto s = scalar_sigmoid(0.0, 0.0);
  Eigen::VectorXd x(1), up(1);
  x << 1.0;
  up << 1.0;
  const auto g = s.backward(x, up);
  CHECK(g.weight[0](0, 0) == 0.25);
  CHECK(g.bias[0](0) == 0.25);
  CHECK(g.input(0, 0) == 0.0);
}

TEST_CASE("gradients match finite differences on small random nets") {
  std::mt19937_64 rng(6);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::array dims{5, 7, 4, 3};
    for (auto out : {Activation::Sigmoid, Activation::Identity}) {
      const auto net = random_net(dims, out, seed);
      const auto r = testing::check_gradients(net, rng, 1000);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("gradients match finite differences on the agent architectures") {
  std::mt19937_64 rng(7);
  const std::array actor_s{8, 250, 250, 6};
  const std::array actor_t{9, 250, 250, 6};
  const std::array critic_s{14, 250, 250, 1};
  const std::array critic_t{15, 250, 250, 1};
  CHECK(testing::check_gradients(random_net(actor_s, Activation::Sigmoid, 1), rng, 150)
            .max_relative_error < 1e-4);
  CHECK(testing::check_gradients(random_net(actor_t, Activation::Sigmoid, 2), rng, 150)
            .max_relative_error < 1e-4);
  CHECK(testing::check_gradients(random_net(critic_s, Activation::Identity, 3), rng, 150)
            .max_relative_error < 1e-4);
  CHECK(testing::check_gradients(random_net(critic_t, Activation::Identity, 4), rng, 150)
            .max_relative_error < 1e-4);
}

TEST_CASE("batched backward sums per-sample gradients") {
  const std::array dims{6, 10, 2};
  const auto net = random_net(dims, Activation::Identity, 8);
  const Eigen::MatrixXd xs = Eigen::MatrixXd::Random(6, 4);
  const Eigen::MatrixXd ups = Eigen::MatrixXd::Random(2, 4);
  ForwardCache cache;
  net.forward_batch(xs, &cache);
  const auto batch = net.backward(cache, ups);
  Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(10, 6);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const auto g = net.backward(Eigen::VectorXd(xs.col(j)), Eigen::VectorXd(ups.col(j)));
    w0 += g.weight[0];
    CHECK((batch.input.col(j) - g.input.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((batch.weight[0] - w0).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((net.input_gradient(cache, ups) - batch.input).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam examples") {
  const std::array dims{3, 4, 2};
  auto net = random_net(dims, Activation::Identity, 9);
  const auto before = net;
  Adam zero_opt(net, {});
  auto grads = net.backward(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(2));
  zero_opt.step(net, grads);
  CHECK(max_parameter_distance(net, before) == 0.0);

  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt(net, cfg);
  grads = net.backward(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(2));
  auto twin = net;
  Adam twin_opt(twin, cfg);
  opt.step(net, grads);
  twin_opt.step(twin, grads);
  CHECK(max_parameter_distance(net, twin) == 0.0);
  CHECK(opt.step_count() == 1);
  // First bias-corrected step moves each parameter by about lr against g.
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const auto &w = net.layers()[k].weight;
    const auto &w0 = before.layers()[k].weight;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double g = grads.weight[k](r, c);
        if (std::abs(g) > 1e-6) {
          CHECK(w(r, c) - w0(r, c) == doctest::Approx(-0.01 * (g > 0 ? 1 : -1)).epsilon(1e-3));
        }
      }
    }
  }
}

TEST_CASE("adam rejects non-finite gradients") {
  const std::array dims{2, 3, 1};
  auto net = random_net(dims, Activation::Identity, 10);
  Adam opt(net, {});
  auto grads = net.backward(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(1));
  grads.weight[0](0, 0) = std::nan("");
  CHECK_THROWS_AS(opt.step(net, grads), NumericalError);
}

TEST_CASE("soft update examples") {
  const std::array dims{2, 3, 1};
  const auto online = random_net(dims, Activation::Identity, 11);
  auto target = random_net(dims, Activation::Identity, 12);
  const auto original = target;
  soft_update(target, online, 0.0);
  CHECK(max_parameter_distance(target, original) == 0.0);
  soft_update(target, online, 1.0);
  CHECK(max_parameter_distance(target, online) == 0.0);

  auto zero = scalar_sigmoid(0.0, 0.0);
  soft_update(zero, scalar_sigmoid(1.0, 1.0), 0.001);
  CHECK(zero.layers()[0].weight(0, 0) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(zero.layers()[0].bias(0) == doctest::Approx(0.001).epsilon(1e-15));

  const std::array other{2, 4, 1};
  CHECK_THROWS_AS(soft_update(target, random_net(other, Activation::Identity, 13), 0.5),
                  ContractError);
  CHECK_THROWS_AS(soft_update(target, online, 1.5), ContractError);
}

TEST_CASE("global norm clipping") {
  const std::array dims{3, 5, 2};
  const auto net = random_net(dims, Activation::Identity, 14);
  auto g = net.backward(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Constant(2, 50.0));
  const double before = std::sqrt(g.squared_norm());
  REQUIRE(before > 1.0);
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(before));
  CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(1.0));
  auto small = net.backward(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Constant(2, 1e-3));
  const auto copy = small;
  clip_global_norm(small, 1.0);
  CHECK(small.weight[0] == copy.weight[0]);
}

TEST_CASE("parameters stay finite over many clipped random updates") {
  const std::array dims{9, 16, 16, 6};
  auto net = random_net(dims, Activation::Sigmoid, 15, 3e-3);
  Adam opt(net, {});
  std::mt19937_64 rng(16);
  std::normal_distribution<double> n(0.0, 100.0);
  for (int k = 0; k < 100000; ++k) {
    Eigen::VectorXd x(9), up(6);
    for (auto &v : x) {
      v = n(rng);
    }
    for (auto &v : up) {
      v = n(rng);
    }
    auto g = net.backward(x, up);
    clip_global_norm(g, 1.0);
    opt.step(net, g);
  }
  CHECK(net.all_finite());
}

TEST_CASE("initialization ranges") {
  const std::array dims{9, 250, 250, 6};
  std::mt19937_64 rng(17);
  const auto net = DenseNet::create(dims, Activation::Relu, Activation::Sigmoid, rng);
  CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= 1.0 / 3.0);
  CHECK(net.layers()[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(250.0));
  CHECK(net.layers()[2].weight.cwiseAbs().maxCoeff() <= 3e-3);
  CHECK(net.parameter_count() == 9 * 250 + 250 + 250 * 250 + 250 + 250 * 6 + 6);
  const auto y = net.forward(Eigen::VectorXd::Constant(9, 0.5));
  CHECK(std::abs(y.mean() - 0.5) < 0.01);
}
