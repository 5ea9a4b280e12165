#include <doctest.h>

#include <random>
#include <vector>

#include "forecast/errors.hpp"
#include "forecast/rtrl.hpp"
#include "forecast/uoro.hpp"
#include "oracles.hpp"

using namespace forecast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Trajectory {
  oracle::Net net;
  RnnParams params;
  std::vector<oracle::Vec> inputs, targets;
};

Trajectory make_trajectory(std::mt19937_64& g, int q, int m1, int p, int steps, double scale) {
  Trajectory t{oracle::Net{q, m1, p, {}}, {}, {}, {}};
  t.net.theta = oracle::random_vec(g, t.net.size(), scale);
  t.params = RnnParams::unflatten(RnnDims{q, m1 - 1, p}, oracle::to_eigen(t.net.theta));
  for (int k = 0; k < steps; ++k) {
    oracle::Vec u = oracle::random_vec(g, m1);
    u[0] = 1.0;
    t.inputs.push_back(u);
    t.targets.push_back(oracle::random_vec(g, p));
  }
  return t;
}

oracle::Vec unroll(const oracle::Net& n, const std::vector<oracle::Vec>& inputs) {
  oracle::Vec x(n.q, 0.0);
  for (const auto& u : inputs) x = oracle::state_step(n, x, u);
  return x;
}

}  // namespace

TEST_CASE("jac_state_x") {
  std::mt19937_64 g(1);
  const RnnParams zero(RnnDims{3, 2, 1});
  CHECK(jac_state_x(zero, VectorXd::Random(3)).isZero());
  const RnnParams p = init_params(RnnDims{4, 3, 2}, 0.5, 2);
  CHECK(jac_state_x(p, VectorXd::Zero(4)) == MatrixXd(p.wa()));
  CHECK_THROWS_AS(jac_state_x(p, VectorXd::Zero(3)), std::invalid_argument);

  for (int t = 0; t < 10; ++t) {
    const Trajectory tr = make_trajectory(g, 5, 4, 2, 1, 0.6);
    const oracle::Vec x = oracle::random_vec(g, 5, 0.5);
    const auto f = [&](const oracle::Vec& xv) { return oracle::state_step(tr.net, xv, tr.inputs[0]); };
    const VectorXd z = oracle::to_eigen(oracle::preactivation(tr.net, x, tr.inputs[0]));
    CHECK(oracle::rel_err(jac_state_x(tr.params, z), oracle::fd_jacobian(f, x)) < 1e-6);
  }
}

TEST_CASE("jac_state_theta") {
  const RnnDims d{3, 4, 2};
  CHECK(jac_state_theta(VectorXd::Zero(3), VectorXd::Zero(5), VectorXd::Random(3), d).isZero());

  SUBCASE("scalar hidden state") {
    const RnnDims s{1, 2, 1};
    const VectorXd x = VectorXd::Constant(1, 0.4), u = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
    const VectorXd z = VectorXd::Constant(1, 0.3);
    const double dphi = 1.0 - std::tanh(0.3) * std::tanh(0.3);
    const MatrixXd jac = jac_state_theta(x, u, z, s);
    REQUIRE(jac.rows() == 1);
    REQUIRE(jac.cols() == 5);
    CHECK(jac(0, 0) == doctest::Approx(dphi * 0.4));
    CHECK(jac(0, 1) == doctest::Approx(dphi * 1.0));
    CHECK(jac(0, 2) == doctest::Approx(dphi * -2.0));
    CHECK(jac(0, 3) == doctest::Approx(dphi * 0.5));
    CHECK(jac(0, 4) == 0.0);
  }
  SUBCASE("matches brute-force finite differences") {
    std::mt19937_64 g(2);
    for (int t = 0; t < 10; ++t) {
      const Trajectory tr = make_trajectory(g, 4, 6, 3, 1, 0.5);
      const oracle::Vec x = oracle::random_vec(g, 4, 0.5);
      const auto f = [&](const oracle::Vec& theta) {
        oracle::Net n = tr.net;
        n.theta = theta;
        return oracle::state_step(n, x, tr.inputs[0]);
      };
      const VectorXd z = oracle::to_eigen(oracle::preactivation(tr.net, x, tr.inputs[0]));
      const MatrixXd jac = jac_state_theta(oracle::to_eigen(x), oracle::to_eigen(tr.inputs[0]), z,
                                           tr.params.dims());
      CHECK(oracle::rel_err(jac, oracle::fd_jacobian(f, tr.net.theta)) < 1e-5);
    }
  }
}

TEST_CASE("influence matrix equals the finite-difference sensitivity of x_n") {
  std::mt19937_64 g(3);
  for (int t = 0; t < 5; ++t) {
    const Trajectory tr = make_trajectory(g, 3, 8, 3, 7, 0.5);
    RtrlState s = RtrlState::initial(tr.params);
    std::vector<oracle::Vec> seen;
    for (std::size_t k = 0; k < tr.inputs.size(); ++k) {
      rtrl_step(s, oracle::to_eigen(tr.inputs[k]), oracle::to_eigen(tr.targets[k]), 0.0, 2.0);
      seen.push_back(tr.inputs[k]);
      const auto f = [&](const oracle::Vec& theta) {
        oracle::Net n = tr.net;
        n.theta = theta;
        return unroll(n, seen);
      };
      CHECK(oracle::rel_err(s.influence, oracle::fd_jacobian(f, tr.net.theta)) < 1e-5);
      CHECK((s.x - oracle::to_eigen(unroll(tr.net, seen))).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("five-step gradient matches unrolled differentiation") {
  std::mt19937_64 g(4);
  for (int t = 0; t < 10; ++t) {
    const Trajectory tr = make_trajectory(g, 3, 7, 3, 5, 0.6);
    RtrlState s = RtrlState::initial(tr.params);
    for (std::size_t k = 0; k < tr.inputs.size(); ++k)
      rtrl_step(s, oracle::to_eigen(tr.inputs[k]), oracle::to_eigen(tr.targets[k]), 0.0, 2.0);
    const auto L = [&](const oracle::Vec& theta) {
      oracle::Net n = tr.net;
      n.theta = theta;
      return oracle::unrolled_loss(n, oracle::Vec(3, 0.0), tr.inputs, tr.targets.back());
    };
    CHECK(oracle::rel_err(s.gradient, oracle::to_eigen(oracle::fd_gradient(L, tr.net.theta))) <
          1e-5);
  }
}

TEST_CASE("first step from zero influence") {
  std::mt19937_64 g(5);
  const Trajectory tr = make_trajectory(g, 4, 5, 2, 1, 0.5);
  RtrlState s = RtrlState::initial(tr.params);
  const VectorXd u = oracle::to_eigen(tr.inputs[0]), target = oracle::to_eigen(tr.targets[0]);
  rtrl_step(s, u, target, 0.0, 2.0);
  const RnnDims d = tr.params.dims();
  const StepCache c = forward(tr.params, VectorXd::Zero(4), u);
  const VectorXd e = target - c.y;
  const VectorXd dt = delta_theta(e, c.x_next, d).transpose();
  const auto wc = d.wc_offset();
  CHECK((s.gradient.tail(d.wc_size()) - dt.tail(d.wc_size())).cwiseAbs().maxCoeff() < 1e-15);
  const VectorXd state_part =
      (grad_x_loss(e, tr.params.wc()) * jac_state_theta(VectorXd::Zero(4), u, c.z, d)).transpose();
  CHECK((s.gradient.head(wc) - state_part.head(wc)).cwiseAbs().maxCoeff() < 1e-14);
  // With x_0 = 0 the W_a block carries no signal on the first step.
  CHECK(s.gradient.head(d.wa_size()).isZero());
}

TEST_CASE("eta = 0 keeps the weights but still updates the influence matrix") {
  const RnnParams p = init_params(RnnDims{4, 5, 3}, 0.3, 6);
  RtrlState s = RtrlState::initial(p);
  VectorXd x = VectorXd::Zero(4);
  for (int k = 0; k < 10; ++k) {
    const VectorXd u = VectorXd::Random(6), target = VectorXd::Random(3);
    const StepCache ref = forward(p, x, u);
    const StepOutput out = rtrl_step(s, u, target, 0.0, 2.0);
    CHECK(out.prediction == ref.y);
    x = ref.x_next;
  }
  CHECK(s.params.flat() == p.flat());
  CHECK_FALSE(s.influence.isZero());
  CHECK(s.influence.rightCols(p.dims().wc_size()).isZero());
}

TEST_CASE("SGD step applies the clipped gradient") {
  const RnnParams p = init_params(RnnDims{4, 5, 3}, 1.0, 7);
  RtrlState s = RtrlState::initial(p);
  for (int k = 0; k < 50; ++k) {
    const VectorXd before = s.params.flat();
    rtrl_step(s, VectorXd::Random(6) * 4, VectorXd::Random(3) * 10, 0.1, 0.5);
    CHECK(s.clipped_gradient.norm() <= 0.5 * (1 + 1e-12));
    CHECK((before - s.params.flat() - 0.1 * s.clipped_gradient).cwiseAbs().maxCoeff() < 1e-12);
  }
  RtrlState bad = RtrlState::initial(p);
  CHECK_THROWS_AS(rtrl_step(bad, VectorXd::Ones(6), VectorXd::Constant(3, NAN), 0.1, 2.0),
                  NumericalError);
}
