#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "forecast/harness.hpp"

namespace forecast {

inline constexpr const char* kVersion = "0.1.0";

/// runs/<algo>__<label>__h<steps>.csv:
///   run,seed,diverged,mae,rmse,nrmse,max_error,jitter
void write_run_metrics(const EvalResult& result, const std::filesystem::path& path);

/// Reads a per-run CSV back into `result.runs` and recomputes the summaries.
void read_run_metrics(const std::filesystem::path& path, EvalResult& result);

/// cv/<algo>__<label>__h<steps>.csv:
///   eta,sigma_init,shl_steps,hidden,mean_cv_rmse,n_valid,n_diverged,chosen
void write_grid_surface(const CvResult& cv, const std::filesystem::path& path);

/// summary_<algo>.csv, one row per metric with mean and half-range per cohort.
void write_summary(const AggregateReport& report, const std::filesystem::path& path);

/// curve_<algo>.csv: horizon_s and the cross-sequence mean of each metric.
void write_curve(const AggregateReport& report, const std::filesystem::path& path);

/// loss/<algo>__<label>__h<steps>.csv: step,mean_loss
void write_loss_trace(const EvalResult& result, const std::filesystem::path& path);

/// Human-readable table of the aggregate report.
void print_report(const AggregateReport& report, std::ostream& out);

struct ExperimentSummary {
  std::vector<CvResult> cross_validation;
  std::vector<EvalResult> results;
  AggregateReport report;
};

/// Full protocol over every manifest sequence and configured horizon:
/// grid search, evaluation with the chosen tuple, aggregation. Writes all
/// CSV outputs plus run_manifest.json into config.output_dir.
ExperimentSummary run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Rebuilds the aggregate report of a finished run from its output
/// directory and rewrites its summary and curve CSVs.
AggregateReport report_from_dir(const std::filesystem::path& dir);

}  // namespace forecast
