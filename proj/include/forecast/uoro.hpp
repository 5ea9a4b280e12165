#pragma once

#include <Eigen/Dense>

#include "forecast/random.hpp"
#include "forecast/rnn.hpp"

namespace forecast {

/// Rank-one estimate x_tilde * theta_tilde^T of the influence matrix dx/dtheta.
struct UoroMemory {
  Eigen::VectorXd x_tilde;
  Eigen::VectorXd theta_tilde;
  double eps_norm = 1e-7;
  double eps_prop = 1e-7;

  static UoroMemory zeros(const RnnDims& dims) {
    return {Eigen::VectorXd::Zero(dims.hidden), Eigen::VectorXd::Zero(dims.param_count())};
  }
};

struct UoroHyper {
  double eta = 0.1;
  double tau = 2.0;
  double sigma_init = 0.02;
  Eigen::Index shl = 1;
  Eigen::Index hidden = 1;
};

/// Mutable trainer state for one run. The scratch members avoid
/// reallocating |W|-sized buffers every step.
struct UoroState {
  RnnParams params;
  Eigen::VectorXd x;
  UoroMemory memory;
  long step = 0;

  /// Gradient estimate of the last step, before clipping.
  Eigen::VectorXd gradient;
  /// The same estimate after clipping at tau; this is what the SGD update applies.
  Eigen::VectorXd clipped_gradient;

  StepCache cache;
  Eigen::VectorXd nu;
  Eigen::VectorXd tangent;

  static UoroState initial(RnnParams params);
};

/// -e^T W_c, the loss gradient with respect to the new hidden state.
Eigen::RowVectorXd grad_x_loss(const Eigen::VectorXd& e, const Eigen::MatrixXd& wc);

/// dL/dy * dF_out/dtheta: zero on W_a and W_b, column-major -e x_next^T on W_c.
Eigen::RowVectorXd delta_theta(const Eigen::VectorXd& e, const Eigen::VectorXd& x_next,
                               const RnnDims& dims);

/// nu^T dF_st/dtheta with a = nu .* tanh'(z): a x^T on W_a, a u^T on W_b, zero on W_c.
Eigen::RowVectorXd delta_theta_g(const Eigen::VectorXd& nu, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 const RnnDims& dims);

/// Finite-difference directional derivative of the state map along x_tilde:
/// (tanh(W_a (x + eps x_tilde) + W_b u) - x_next) / eps.
Eigen::VectorXd tangent_propagate(const RnnParams& params, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x_tilde, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& x_next, double eps_prop);

/// One UORO learning-and-prediction step. Order of operations:
///   forward, error, delta_theta, gradient estimate from the incoming
///   (x_tilde, theta_tilde), draw nu, tangent propagation, delta_theta_g,
///   rho_0 / rho_1, estimator update, clip, SGD update.
/// Throws NumericalError naming the first non-finite quantity.
StepOutput uoro_step(UoroState& state, const Eigen::VectorXd& u, const Eigen::VectorXd& y_star,
                     const UoroHyper& hyper, Rng& rng);

/// Same step with the sign vector supplied by the caller.
StepOutput uoro_step_with_signs(UoroState& state, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& y_star, const UoroHyper& hyper,
                                const Eigen::VectorXd& nu);

}  // namespace forecast
