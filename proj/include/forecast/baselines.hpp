#pragma once

#include <span>

#include <Eigen/Dense>

#include "forecast/rnn.hpp"
#include "forecast/signal.hpp"

namespace forecast {

/// Plain least-mean-squares linear predictor y = W u, W of size p x (m+1).
struct LmsFilter {
  Eigen::MatrixXd weights;
  double eta = 0.01;
  double tau = 2.0;

  static LmsFilter zeros(Eigen::Index outputs, Eigen::Index input_size, double eta,
                         double tau = 2.0) {
    return {Eigen::MatrixXd::Zero(outputs, input_size), eta, tau};
  }
};

/// y = W u; the instantaneous-loss gradient -e u^T is clipped at tau (Frobenius
/// norm of the whole matrix) before W <- W - eta * grad.
StepOutput lms_step(LmsFilter& filter, const Eigen::VectorXd& u, const Eigen::VectorXd& y_star);

struct LinearRegressor {
  Eigen::MatrixXd weights;
  bool fitted = false;
};

/// Ordinary least squares over the samples (rows of U and Y). Rank-deficient
/// or under-determined designs get the minimum-norm solution; the latter
/// also emits a warning.
LinearRegressor fit_linreg(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);
LinearRegressor fit_linreg(std::span<const WindowedSample> samples);

/// Throws std::logic_error on an unfitted model.
Eigen::VectorXd predict_linreg(const LinearRegressor& model, const Eigen::VectorXd& u);

/// Hold-last-position forecast: the estimate for step n+shl+horizon-1 is the
/// latest observed position, step n+shl-1.
Eigen::VectorXd no_prediction(const MarkerRecord& record, Index shl, Index horizon, Index n);

}  // namespace forecast
