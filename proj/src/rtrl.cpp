#include "forecast/rtrl.hpp"

#include <stdexcept>

#include "forecast/errors.hpp"

namespace forecast {

RtrlState RtrlState::initial(RnnParams params) {
  RtrlState s;
  const RnnDims d = params.dims();
  s.params = std::move(params);
  s.x = Eigen::VectorXd::Zero(d.hidden);
  s.influence = Eigen::MatrixXd::Zero(d.hidden, d.param_count());
  s.gradient = Eigen::VectorXd::Zero(d.param_count());
  return s;
}

Eigen::MatrixXd jac_state_x(const RnnParams& params, const Eigen::VectorXd& z) {
  if (z.size() != params.dims().hidden) throw std::invalid_argument("jac_state_x: bad z size");
  return tanh_prime(z).asDiagonal() * params.wa();
}

Eigen::MatrixXd jac_state_theta(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& z, const RnnDims& dims) {
  const Eigen::Index q = dims.hidden;
  if (x.size() != q || z.size() != q || u.size() != dims.inputs + 1)
    throw std::invalid_argument("jac_state_theta: dimension mismatch");
  const Eigen::VectorXd dphi = tanh_prime(z);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q, dims.param_count());
  // Column of W(i, j) in a column-major block is offset + i + q * j, so the
  // q columns of block-column j form a diagonal sub-block.
  for (Eigen::Index j = 0; j < q; ++j)
    jac.block(0, q * j, q, q).diagonal() = dphi * x[j];
  for (Eigen::Index j = 0; j <= dims.inputs; ++j)
    jac.block(0, dims.wb_offset() + q * j, q, q).diagonal() = dphi * u[j];
  return jac;
}

StepOutput rtrl_step(RtrlState& state, const Eigen::VectorXd& u, const Eigen::VectorXd& y_star,
                     double eta, double tau) {
  const RnnDims& d = state.params.dims();
  const Eigen::Index q = d.hidden;
  if (y_star.size() != d.outputs) throw std::invalid_argument("rtrl_step: dimension mismatch");
  const long n = state.step;

  forward_into(state.params, state.x, u, state.cache);
  const StepCache& c = state.cache;
  if (!c.y.allFinite()) throw NumericalError("prediction", n);
  StepOutput out;
  out.prediction = c.y;
  const Eigen::VectorXd e = y_star - c.y;
  out.loss = 0.5 * e.squaredNorm();

  // J' = diag(tanh'(z)) W_a J + dF_st/dtheta. The W_c block of J stays zero,
  // so only the first wc_offset columns are propagated.
  const Eigen::Index active = d.wc_offset();
  const Eigen::VectorXd dphi = (1.0 - c.x_next.array().square()).matrix();
  state.scratch.resize(q, d.param_count());
  state.scratch.leftCols(active).noalias() = state.params.wa() * state.influence.leftCols(active);
  state.scratch.leftCols(active) = dphi.asDiagonal() * state.scratch.leftCols(active);
  state.scratch.rightCols(d.wc_size()).setZero();
  for (Eigen::Index j = 0; j < q; ++j)
    state.scratch.block(0, q * j, q, q).diagonal() += dphi * state.x[j];
  for (Eigen::Index j = 0; j <= d.inputs; ++j)
    state.scratch.block(0, d.wb_offset() + q * j, q, q).diagonal() += dphi * u[j];
  state.influence.swap(state.scratch);
  if (!state.influence.allFinite()) throw NumericalError("influence matrix", n);

  // dL/dtheta = -e^T W_c J' + delta_theta.
  const Eigen::VectorXd grad_x = -(state.params.wc().transpose() * e);
  state.gradient.resize(d.param_count());
  state.gradient.head(active).noalias() = state.influence.leftCols(active).transpose() * grad_x;
  MatrixMap(state.gradient.data() + d.wc_offset(), d.outputs, d.hidden).noalias() =
      -e * c.x_next.transpose();
  if (!state.gradient.allFinite()) throw NumericalError("gradient", n);

  state.clipped_gradient = state.gradient;
  clip_gradient_in_place(state.clipped_gradient, tau);
  if (eta != 0.0) state.params.flat().noalias() -= eta * state.clipped_gradient;
  if (!state.params.flat().allFinite()) throw NumericalError("weights", n);

  state.x = c.x_next;
  ++state.step;
  return out;
}

}  // namespace forecast
