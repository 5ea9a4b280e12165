#pragma once

#include <Eigen/Dense>

#include "forecast/rnn.hpp"

namespace forecast {

/// Exact real-time recurrent learning. Keeps the full influence matrix
/// J = dx/dtheta (q x |W|, columns in the shared flat parameter order).
struct RtrlState {
  RnnParams params;
  Eigen::VectorXd x;
  Eigen::MatrixXd influence;
  long step = 0;

  /// Exact dL/dtheta of the last step, before clipping.
  Eigen::VectorXd gradient;
  Eigen::VectorXd clipped_gradient;

  StepCache cache;
  Eigen::MatrixXd scratch;

  static RtrlState initial(RnnParams params);
};

/// diag(tanh'(z)) W_a.
Eigen::MatrixXd jac_state_x(const RnnParams& params, const Eigen::VectorXd& z);

/// dF_st/dtheta: row i has tanh'(z_i) x_j at the W_a(i, j) column,
/// tanh'(z_i) u_j at the W_b(i, j) column and zeros on W_c.
Eigen::MatrixXd jac_state_theta(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& z, const RnnDims& dims);

/// Forward pass, influence update J' = jac_state_x J + jac_state_theta, exact
/// gradient -e^T W_c J' + delta_theta, clipping at tau and an SGD step.
/// J is propagated with the weights in force at this step.
StepOutput rtrl_step(RtrlState& state, const Eigen::VectorXd& u, const Eigen::VectorXd& y_star,
                     double eta, double tau);

}  // namespace forecast
