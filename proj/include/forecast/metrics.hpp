#pragma once

#include <array>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "forecast/signal.hpp"

namespace forecast {

/// Predicted and true marker positions in mm. Row r corresponds to time
/// step first_step + r; columns are (m1x, m1y, m1z, m2x, ...).
struct PredictionTrace {
  PositionMatrix predicted;
  PositionMatrix truth;
  Index first_step = 0;

  Index length() const { return truth.rows(); }
  Index markers() const { return truth.cols() / 3; }
};

/// Euclidean distance between predicted and true position of marker j at
/// absolute time step k.
double instantaneous_error(const PredictionTrace& trace, Index k, Index j);

double rmse(const PredictionTrace& trace);
/// Throws std::domain_error when the true signal is constant over the trace.
double nrmse(const PredictionTrace& trace);
double mae(const PredictionTrace& trace);
double max_error(const PredictionTrace& trace);
/// Mean step-to-step displacement of the prediction; needs >= 2 steps.
double jitter(const PredictionTrace& trace);

enum class Metric { mae, rmse, nrmse, max_error, jitter };
inline constexpr std::array<Metric, 5> kAllMetrics{Metric::mae, Metric::rmse, Metric::nrmse,
                                                  Metric::max_error, Metric::jitter};
std::string_view metric_name(Metric m);

struct MetricSet {
  double mae = 0.0;
  double rmse = 0.0;
  double nrmse = 0.0;
  double max_error = 0.0;
  double jitter = 0.0;

  double get(Metric m) const;
};

MetricSet compute_metrics(const PredictionTrace& trace);

struct CiSummary {
  double mean = 0.0;
  double half_range = 0.0;
  Index n_runs = 0;
};

/// Mean and 95% half-range 1.96 * s / sqrt(n) with the unbiased sample
/// standard deviation s. Needs n >= 2.
CiSummary ci_per_condition(std::span<const double> values);

/// Aggregated half-range over a (sequence x horizon) grid of per-cell
/// half-ranges: sqrt(sum of squares) / cell count.
double ci_aggregate(const Eigen::MatrixXd& half_ranges);
double ci_aggregate(std::span<const double> half_ranges);

}  // namespace forecast
