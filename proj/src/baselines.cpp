#include "forecast/baselines.hpp"

#include <stdexcept>
#include <string>

#include "forecast/errors.hpp"

namespace forecast {

StepOutput lms_step(LmsFilter& filter, const Eigen::VectorXd& u, const Eigen::VectorXd& y_star) {
  if (u.size() != filter.weights.cols() || y_star.size() != filter.weights.rows())
    throw std::invalid_argument("lms_step: dimension mismatch");
  StepOutput out;
  out.prediction.noalias() = filter.weights * u;
  const Eigen::VectorXd e = y_star - out.prediction;
  out.loss = 0.5 * e.squaredNorm();

  // |e u^T|_F = |e| |u|.
  const double norm = e.norm() * u.norm();
  double scale = filter.eta;
  if (norm > filter.tau) scale *= filter.tau / norm;
  if (scale != 0.0) filter.weights.noalias() += scale * e * u.transpose();
  if (!filter.weights.allFinite()) throw NumericalError("LMS weights", 0);
  return out;
}

LinearRegressor fit_linreg(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  if (inputs.rows() != targets.rows() || inputs.rows() == 0)
    throw std::invalid_argument("fit_linreg: need matching, non-empty sample sets");
  if (!inputs.allFinite() || !targets.allFinite())
    throw std::invalid_argument("fit_linreg: non-finite design matrix");
  if (inputs.rows() < inputs.cols())
    warn("linear regression is under-determined (" + std::to_string(inputs.rows()) +
         " samples, " + std::to_string(inputs.cols()) + " unknowns); using minimum-norm solution");

  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(inputs);
  LinearRegressor model;
  model.weights = cod.solve(targets).transpose();
  model.fitted = true;
  return model;
}

LinearRegressor fit_linreg(std::span<const WindowedSample> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_linreg: no samples");
  const Index m1 = samples.front().input.size();
  const Index p = samples.front().target.size();
  Eigen::MatrixXd u(static_cast<Index>(samples.size()), m1);
  Eigen::MatrixXd y(static_cast<Index>(samples.size()), p);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].input.size() != m1 || samples[i].target.size() != p)
      throw std::invalid_argument("fit_linreg: inconsistent sample sizes");
    u.row(static_cast<Index>(i)) = samples[i].input.transpose();
    y.row(static_cast<Index>(i)) = samples[i].target.transpose();
  }
  return fit_linreg(u, y);
}

Eigen::VectorXd predict_linreg(const LinearRegressor& model, const Eigen::VectorXd& u) {
  if (!model.fitted) throw std::logic_error("predict_linreg: model has not been fitted");
  if (u.size() != model.weights.cols()) throw std::invalid_argument("predict_linreg: bad input");
  return model.weights * u;
}

Eigen::VectorXd no_prediction(const MarkerRecord& record, Index shl, Index horizon, Index n) {
  if (n < 0 || shl < 1 || horizon < 0 || n + shl + horizon - 1 >= record.length())
    throw std::out_of_range("no_prediction: window exceeds record");
  return record.positions.row(n + shl - 1).transpose();
}

}  // namespace forecast
