#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "forecast/rnn.hpp"
#include "oracles.hpp"

using namespace forecast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("parameter count") {
  CHECK(RnnDims::for_markers(90, 3, 70).param_count() == 65700);
  const RnnDims d{10, 90, 9};
  CHECK(d.param_count() == d.wa_size() + d.wb_size() + d.wc_size());
  CHECK(d.wc_offset() == 100 + 10 * 91);
}

TEST_CASE("flatten/unflatten uses column-major blocks in [W_a | W_b | W_c] order") {
  const RnnDims d{3, 4, 2};
  VectorXd theta = VectorXd::LinSpaced(d.param_count(), 0, static_cast<double>(d.param_count() - 1));
  const RnnParams p = RnnParams::unflatten(d, theta);
  CHECK(p.wa()(1, 0) == 1.0);  // second entry walks down the first column
  CHECK(p.wa()(0, 1) == 3.0);
  CHECK(p.wb()(0, 0) == 9.0);
  CHECK(p.wb()(2, 4) == 9.0 + 2 + 3 * 4);
  CHECK(p.wc()(1, 2) == d.wc_offset() + 1 + 2 * 2);

  const RnnParams back = RnnParams::from_matrices(p.wa(), p.wb(), p.wc());
  CHECK(back.flatten() == theta);
}

TEST_CASE("init_params draws N(0, sigma^2) reproducibly") {
  const RnnDims d{10, 90, 9};
  REQUIRE(d.param_count() == 1100);
  const RnnParams a = init_params(d, 0.02, 42);
  const RnnParams b = init_params(d, 0.02, 42);
  CHECK(a.flat() == b.flat());
  CHECK(a.flat() != init_params(d, 0.02, 43).flat());

  const double mean = a.flat().mean();
  const double sd = std::sqrt((a.flat().array() - mean).square().sum() / (a.flat().size() - 1));
  CHECK(std::abs(sd - 0.02) < 0.2 * 0.02);
  CHECK_THROWS_AS(init_params(d, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_params(d, -1.0, 1), std::invalid_argument);
}

TEST_CASE("forward pass") {
  SUBCASE("zero weights give zero state and output") {
    const RnnParams p(RnnDims{4, 6, 3});
    const StepCache c = forward(p, VectorXd::Random(4), VectorXd::Random(7));
    CHECK(c.x_next.isZero());
    CHECK(c.y.isZero());
  }
  SUBCASE("bias-only W_b makes the state independent of the signal") {
    RnnParams p(RnnDims{3, 5, 2});
    p.wb().col(0) << 0.3, -0.7, 1.1;
    const StepCache c1 = forward(p, VectorXd::Zero(3), (VectorXd(6) << 1, 1, 2, 3, 4, 5).finished());
    const StepCache c2 = forward(p, VectorXd::Zero(3), (VectorXd(6) << 1, -9, 0, 0, 7, 1).finished());
    CHECK(c1.x_next.isApprox(p.wb().col(0).array().tanh().matrix()));
    CHECK(c1.x_next == c2.x_next);
  }
  SUBCASE("matches the scalar-loop oracle") {
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 20; ++trial) {
      oracle::Net n{5, 8, 3, {}};
      n.theta = oracle::random_vec(g, n.size(), 0.4);
      const auto x = oracle::random_vec(g, n.q), u = oracle::random_vec(g, n.m1);
      const RnnParams p = RnnParams::unflatten(RnnDims{5, 7, 3}, oracle::to_eigen(n.theta));
      const StepCache c = forward(p, oracle::to_eigen(x), oracle::to_eigen(u));
      const auto xn = oracle::state_step(n, x, u);
      const auto y = oracle::readout(n, xn);
      CHECK((c.x_next - oracle::to_eigen(xn)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((c.y - oracle::to_eigen(y)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(c.x_next.cwiseAbs().maxCoeff() < 1.0);
    }
  }
  SUBCASE("dimension mismatch") {
    const RnnParams p(RnnDims{3, 4, 2});
    CHECK_THROWS_AS(forward(p, VectorXd::Zero(2), VectorXd::Zero(5)), std::invalid_argument);
    CHECK_THROWS_AS(forward(p, VectorXd::Zero(3), VectorXd::Zero(4)), std::invalid_argument);
  }
}

TEST_CASE("instantaneous loss") {
  const VectorXd y = VectorXd::Random(5);
  CHECK(loss(y, y).value == 0.0);
  CHECK(loss(y, y).error.isZero());
  CHECK(loss(VectorXd::Zero(2), (VectorXd(2) << 3, 4).finished()).value == doctest::Approx(12.5));
  std::mt19937_64 g(3);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_vec(g, 9), b = oracle::random_vec(g, 9);
    CHECK(loss(oracle::to_eigen(a), oracle::to_eigen(b)).value ==
          doctest::Approx(oracle::half_sq_err(a, b)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(loss(VectorXd::Zero(2), VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("tanh derivative") {
  CHECK(tanh_prime(VectorXd::Zero(3)).isOnes());
  const VectorXd big = (VectorXd(2) << 800.0, -800.0).finished();
  CHECK(tanh_prime(big).isZero());
  const VectorXd z = VectorXd::LinSpaced(41, -4.0, 4.0);
  const double h = 1e-6;
  const VectorXd fd = ((z.array() + h).tanh() - (z.array() - h).tanh()) / (2 * h);
  CHECK((tanh_prime(z) - fd).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gradient clipping") {
  const VectorXd small = (VectorXd(2) << 0.6, 0.8).finished();
  CHECK(clip_gradient(small, 2.0) == small);
  const VectorXd c = clip_gradient((VectorXd(2) << 3, 4).finished(), 2.0);
  CHECK(c[0] == doctest::Approx(1.2));
  CHECK(c[1] == doctest::Approx(1.6));
  CHECK(c.norm() <= 2.0);
  CHECK_THROWS_AS(clip_gradient(small, 0.0), std::invalid_argument);

  std::mt19937_64 g(11);
  std::lognormal_distribution<double> scale(0.0, 2.0);
  for (int t = 0; t < 2000; ++t) {
    VectorXd v = oracle::to_eigen(oracle::random_vec(g, 1 + t % 50, scale(g)));
    const VectorXd once = clip_gradient(v, 2.0);
    CHECK(once.norm() <= 2.0 + 1e-12);
    CHECK(clip_gradient(once, 2.0) == once);  // idempotent
    if (v.norm() <= 2.0) CHECK(once == v);
  }
}

TEST_CASE("checkpoint round trip") {
  const RnnParams p = init_params(RnnDims{4, 9, 3}, 0.1, 5);
  const auto path = std::filesystem::temp_directory_path() / "forecast_ckpt_test.bin";
  save_params(p, path);
  CHECK(std::filesystem::file_size(path) == 8 + 3 * 8 + p.flat().size() * 8);
  const RnnParams q = load_params(path);
  CHECK(q.dims() == p.dims());
  CHECK(q.flat() == p.flat());
  std::filesystem::resize_file(path, 40);
  CHECK_THROWS(load_params(path));
  std::filesystem::remove(path);
}
