#include "forecast/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace forecast {
namespace {

void require_nonempty(const PredictionTrace& t) {
  if (t.length() == 0 || t.truth.cols() == 0) throw std::invalid_argument("empty prediction trace");
  if (t.predicted.rows() != t.truth.rows() || t.predicted.cols() != t.truth.cols() ||
      t.truth.cols() % 3 != 0)
    throw std::invalid_argument("prediction trace shape mismatch");
}

/// Per-marker errors, one row per step.
Eigen::MatrixXd marker_errors(const PredictionTrace& t) {
  const Index markers = t.markers();
  Eigen::MatrixXd d(t.length(), markers);
  for (Index j = 0; j < markers; ++j)
    d.col(j) = (t.predicted.middleCols(3 * j, 3) - t.truth.middleCols(3 * j, 3)).rowwise().norm();
  return d;
}

}  // namespace

double instantaneous_error(const PredictionTrace& trace, Index k, Index j) {
  const Index r = k - trace.first_step;
  if (r < 0 || r >= trace.length() || j < 0 || j >= trace.markers())
    throw std::out_of_range("instantaneous_error: index out of range");
  return (trace.predicted.row(r).segment(3 * j, 3) - trace.truth.row(r).segment(3 * j, 3)).norm();
}

double rmse(const PredictionTrace& trace) {
  require_nonempty(trace);
  const double count = static_cast<double>(trace.markers() * trace.length());
  return std::sqrt((trace.predicted - trace.truth).squaredNorm() / count);
}

double nrmse(const PredictionTrace& trace) {
  require_nonempty(trace);
  const Eigen::RowVectorXd mean = trace.truth.colwise().mean();
  const double denom = (trace.truth.rowwise() - mean).squaredNorm();
  if (!(denom > 0.0)) throw std::domain_error("nRMSE undefined for a constant true signal");
  return std::sqrt((trace.predicted - trace.truth).squaredNorm() / denom);
}

double mae(const PredictionTrace& trace) {
  require_nonempty(trace);
  return marker_errors(trace).mean();
}

double max_error(const PredictionTrace& trace) {
  require_nonempty(trace);
  return marker_errors(trace).maxCoeff();
}

double jitter(const PredictionTrace& trace) {
  require_nonempty(trace);
  const Index steps = trace.length();
  if (steps < 2) throw std::invalid_argument("jitter needs at least two steps");
  const Index markers = trace.markers();
  double total = 0.0;
  for (Index j = 0; j < markers; ++j) {
    const auto p = trace.predicted.middleCols(3 * j, 3);
    total += (p.bottomRows(steps - 1) - p.topRows(steps - 1)).rowwise().norm().sum();
  }
  return total / static_cast<double>(markers * (steps - 1));
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::mae: return "mae";
    case Metric::rmse: return "rmse";
    case Metric::nrmse: return "nrmse";
    case Metric::max_error: return "max_error";
    case Metric::jitter: return "jitter";
  }
  return "?";
}

double MetricSet::get(Metric m) const {
  switch (m) {
    case Metric::mae: return mae;
    case Metric::rmse: return rmse;
    case Metric::nrmse: return nrmse;
    case Metric::max_error: return max_error;
    case Metric::jitter: return jitter;
  }
  return 0.0;
}

MetricSet compute_metrics(const PredictionTrace& trace) {
  MetricSet s;
  s.mae = mae(trace);
  s.rmse = rmse(trace);
  s.nrmse = nrmse(trace);
  s.max_error = max_error(trace);
  s.jitter = jitter(trace);
  return s;
}

CiSummary ci_per_condition(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("confidence interval needs at least two runs");
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Index>(values.size()));
  const double n = static_cast<double>(values.size());
  CiSummary s;
  s.n_runs = static_cast<Index>(values.size());
  s.mean = v.mean();
  const double var = (v.array() - s.mean).square().sum() / (n - 1.0);
  s.half_range = 1.96 * std::sqrt(var) / std::sqrt(n);
  return s;
}

double ci_aggregate(const Eigen::MatrixXd& half_ranges) {
  if (half_ranges.size() == 0) throw std::invalid_argument("ci_aggregate: empty grid");
  return half_ranges.norm() / static_cast<double>(half_ranges.size());
}

double ci_aggregate(std::span<const double> half_ranges) {
  if (half_ranges.empty()) throw std::invalid_argument("ci_aggregate: empty grid");
  return ci_aggregate(Eigen::MatrixXd(
      Eigen::Map<const Eigen::VectorXd>(half_ranges.data(), static_cast<Index>(half_ranges.size()))));
}

}  // namespace forecast
