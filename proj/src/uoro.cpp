#include "forecast/uoro.hpp"

#include <cmath>
#include <stdexcept>

#include "forecast/errors.hpp"

namespace forecast {
namespace {

template <typename V>
void check_finite(const V& v, const char* quantity, long step) {
  if (!v.allFinite()) throw NumericalError(quantity, step);
}

void check_dims(const RnnDims& d, const Eigen::VectorXd& e, const Eigen::VectorXd& x_next) {
  if (e.size() != d.outputs || x_next.size() != d.hidden)
    throw std::invalid_argument("delta_theta: dimension mismatch");
}

}  // namespace

UoroState UoroState::initial(RnnParams params) {
  UoroState s;
  const RnnDims d = params.dims();
  s.params = std::move(params);
  s.x = Eigen::VectorXd::Zero(d.hidden);
  s.memory = UoroMemory::zeros(d);
  s.gradient = Eigen::VectorXd::Zero(d.param_count());
  s.nu.resize(d.hidden);
  s.tangent.resize(d.hidden);
  return s;
}

Eigen::RowVectorXd grad_x_loss(const Eigen::VectorXd& e, const Eigen::MatrixXd& wc) {
  if (e.size() != wc.rows()) throw std::invalid_argument("grad_x_loss: dimension mismatch");
  return -(e.transpose() * wc);
}

Eigen::RowVectorXd delta_theta(const Eigen::VectorXd& e, const Eigen::VectorXd& x_next,
                               const RnnDims& dims) {
  check_dims(dims, e, x_next);
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(dims.param_count());
  MatrixMap(out.data() + dims.wc_offset(), dims.outputs, dims.hidden).noalias() =
      -e * x_next.transpose();
  return out;
}

Eigen::RowVectorXd delta_theta_g(const Eigen::VectorXd& nu, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 const RnnDims& dims) {
  if (nu.size() != dims.hidden || z.size() != dims.hidden || x.size() != dims.hidden ||
      u.size() != dims.inputs + 1)
    throw std::invalid_argument("delta_theta_g: dimension mismatch");
  const Eigen::VectorXd a = nu.cwiseProduct(tanh_prime(z));
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(dims.param_count());
  MatrixMap(out.data(), dims.hidden, dims.hidden).noalias() = a * x.transpose();
  MatrixMap(out.data() + dims.wb_offset(), dims.hidden, dims.inputs + 1).noalias() =
      a * u.transpose();
  return out;
}

Eigen::VectorXd tangent_propagate(const RnnParams& params, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x_tilde, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& x_next, double eps_prop) {
  if (!(eps_prop > 0.0)) throw std::invalid_argument("eps_prop must be positive");
  const Eigen::VectorXd shifted = x + eps_prop * x_tilde;
  const Eigen::VectorXd pre = params.wa() * shifted + params.wb() * u;
  return (pre.array().tanh().matrix() - x_next) / eps_prop;
}

StepOutput uoro_step(UoroState& state, const Eigen::VectorXd& u, const Eigen::VectorXd& y_star,
                     const UoroHyper& hyper, Rng& rng) {
  state.nu.resize(state.params.dims().hidden);
  rng.rademacher(state.nu);
  const Eigen::VectorXd nu = state.nu;
  return uoro_step_with_signs(state, u, y_star, hyper, nu);
}

StepOutput uoro_step_with_signs(UoroState& state, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& y_star, const UoroHyper& hyper,
                                const Eigen::VectorXd& nu) {
  const RnnDims& d = state.params.dims();
  if (y_star.size() != d.outputs || nu.size() != d.hidden)
    throw std::invalid_argument("uoro_step: dimension mismatch");
  UoroMemory& mem = state.memory;
  const long n = state.step;

  // Prediction and error.
  forward_into(state.params, state.x, u, state.cache);
  const StepCache& c = state.cache;
  check_finite(c.y, "prediction", n);
  StepOutput out;
  out.prediction = c.y;
  const Eigen::VectorXd e = y_star - c.y;
  out.loss = 0.5 * e.squaredNorm();

  // Gradient estimate from the incoming rank-one pair, plus delta_theta on W_c.
  const Eigen::VectorXd grad_x = -(state.params.wc().transpose() * e);
  const double proj = grad_x.dot(mem.x_tilde);
  state.gradient = proj * mem.theta_tilde;
  MatrixMap(state.gradient.data() + d.wc_offset(), d.outputs, d.hidden).noalias() -=
      e * c.x_next.transpose();
  check_finite(state.gradient, "gradient estimate", n);

  // Tangent forward propagation of x_tilde through the state map. The shifted
  // pre-activation is z + eps * W_a x_tilde, i.e. W_a (x + eps x_tilde) + W_b u.
  state.tangent.noalias() = state.params.wa() * mem.x_tilde;
  state.tangent = ((c.z + mem.eps_prop * state.tangent).array().tanh().matrix() - c.x_next) /
                  mem.eps_prop;
  check_finite(state.tangent, "tangent propagation", n);

  // delta_theta_g = nu^T dF_st/dtheta, kept in factored form a (x, u).
  const Eigen::VectorXd a =
      nu.cwiseProduct((1.0 - c.x_next.array().square()).matrix());
  const double g_norm = a.norm() * std::sqrt(state.x.squaredNorm() + u.squaredNorm());

  const double eps = mem.eps_norm;
  const double rho0 = std::sqrt(mem.theta_tilde.norm() / (state.tangent.norm() + eps)) + eps;
  const double rho1 = std::sqrt(g_norm / (nu.norm() + eps)) + eps;

  mem.x_tilde = rho0 * state.tangent + rho1 * nu;
  mem.theta_tilde /= rho0;
  const Eigen::VectorXd a_scaled = a / rho1;
  MatrixMap(mem.theta_tilde.data(), d.hidden, d.hidden).noalias() +=
      a_scaled * state.x.transpose();
  MatrixMap(mem.theta_tilde.data() + d.wb_offset(), d.hidden, d.inputs + 1).noalias() +=
      a_scaled * u.transpose();
  check_finite(mem.x_tilde, "x_tilde", n);
  check_finite(mem.theta_tilde, "theta_tilde", n);

  // Clipped SGD update; `gradient` keeps the raw estimate.
  state.clipped_gradient = state.gradient;
  clip_gradient_in_place(state.clipped_gradient, hyper.tau);
  if (hyper.eta != 0.0) state.params.flat().noalias() -= hyper.eta * state.clipped_gradient;
  check_finite(state.params.flat(), "weights", n);

  state.x = c.x_next;
  ++state.step;
  return out;
}

}  // namespace forecast
