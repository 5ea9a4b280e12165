#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forecast/metrics.hpp"
#include "forecast/signal.hpp"

namespace forecast {

enum class Algorithm { uoro, rtrl, lms, linreg, none };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& text);

/// Methods with random weight initialization; the others are evaluated once.
inline bool is_stochastic(Algorithm a) { return a == Algorithm::uoro || a == Algorithm::rtrl; }

/// Partition used for cross-validation: 54 s / 6 s for linear regression,
/// 30 s / 30 s otherwise.
PartitionScheme partition_scheme(Algorithm a);

/// One hyper-parameter tuple. Fields an algorithm does not use stay at zero
/// (the history length is always used except by `none`).
struct Hyper {
  double eta = 0.0;
  double sigma_init = 0.0;
  Index shl = 1;
  Index hidden = 0;

  friend bool operator==(const Hyper&, const Hyper&) = default;
};

/// Strict weak order used to break ties: smaller q, then L, then eta, then sigma.
bool tie_break_less(const Hyper& a, const Hyper& b);

struct HyperGrid {
  std::vector<double> eta;
  std::vector<double> sigma_init;
  std::vector<Index> shl;
  std::vector<Index> hidden;

  /// The cross-validation ranges used for each method by default.
  static HyperGrid defaults(Algorithm a);

  /// Cartesian product of the ranges the algorithm uses, in a fixed order.
  std::vector<Hyper> tuples(Algorithm a) const;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::uoro;
  std::vector<double> horizons_s;
  HyperGrid grid;
  int n_cv = 50;
  int n_test = 300;
  std::uint64_t master_seed = 0;
  double tau = 2.0;
  unsigned threads = 0;  // 0 = hardware concurrency
  bool record_loss_trace = true;
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "forecast_out";

  /// Defaults for `algorithm`: horizons 0.1 s .. 2.0 s and the default grids.
  static ExperimentConfig defaults(Algorithm algorithm);
};

/// Reads the JSON config; missing fields fall back to ExperimentConfig::defaults.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});

/// Runs `fn(i)` for i in [0, count) on a pool of worker threads. Exceptions
/// are rethrown on the caller's thread after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

struct RunOutput {
  PredictionTrace trace;
  std::vector<double> loss;  // per-step instantaneous loss on normalized data
  bool diverged = false;
  std::string divergence;
};

/// Trains one model from t = 0 through the end of `scoring`, updating at
/// every step, and records denormalized predictions for targets in `scoring`.
/// Linear regression is fitted offline on the training range first. The
/// normalizer is fitted on `partition.train`.
RunOutput run_sequence_online(Algorithm algorithm, const MarkerRecord& record,
                              const Partition& partition, const Hyper& hyper, Index horizon,
                              std::uint64_t seed, StepRange scoring, double tau = 2.0,
                              bool keep_loss = false);

struct TupleScore {
  Hyper hyper;
  double mean_rmse = 0.0;
  int n_valid = 0;
  int n_diverged = 0;
  bool excluded = false;
};

struct CvResult {
  Index horizon = 0;
  std::vector<TupleScore> surface;
  std::size_t chosen = 0;

  const Hyper& chosen_hyper() const { return surface.at(chosen).hyper; }
};

/// Grid search at one horizon (in steps). `sequence_index` only feeds the
/// seed derivation.
CvResult grid_search(Algorithm algorithm, const MarkerRecord& record, Index horizon,
                     const ExperimentConfig& config, std::size_t sequence_index = 0);

std::vector<CvResult> grid_search(Algorithm algorithm, const MarkerRecord& record,
                                  const std::vector<Index>& horizons,
                                  const ExperimentConfig& config, std::size_t sequence_index = 0);

struct RunMetrics {
  int run = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  MetricSet metrics;
};

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> half_range;  // absent with fewer than two valid runs
  int n_runs = 0;
};

struct EvalResult {
  Algorithm algorithm = Algorithm::none;
  std::string label;
  BreathingClass breathing_class = BreathingClass::unlabeled;
  Index horizon = 0;
  double horizon_s = 0.0;
  Hyper hyper;
  std::vector<RunMetrics> runs;
  std::array<MetricSummary, 5> summary{};  // indexed like kAllMetrics
  int n_diverged = 0;
  std::vector<double> mean_loss;

  const MetricSummary& stat(Metric m) const { return summary[static_cast<std::size_t>(m)]; }
};

/// Summaries over the non-diverged runs.
void summarize(EvalResult& result);

/// n_test seeded runs (one for deterministic methods) scored on the test range.
EvalResult evaluate(Algorithm algorithm, const MarkerRecord& record, const Hyper& hyper,
                    Index horizon, const ExperimentConfig& config, std::size_t sequence_index = 0);

struct AggregateStat {
  double mean = 0.0;
  std::optional<double> half_range;
};

struct CohortSummary {
  std::string cohort;  // "all", "regular" or "irregular"
  std::vector<std::string> labels;
  std::array<AggregateStat, 5> stats{};
};

struct CurvePoint {
  double horizon_s = 0.0;
  std::array<double, 5> mean{};
  std::array<std::optional<double>, 5> half_range{};
};

struct AggregateReport {
  Algorithm algorithm = Algorithm::none;
  std::vector<CohortSummary> cohorts;
  std::vector<CurvePoint> curve;
};

/// Averages cell means over sequences x horizons and combines half-ranges by
/// root-sum-square. `exclusions` maps a cohort name to labels left out of it.
/// Throws std::invalid_argument listing missing cells when the grid is incomplete.
AggregateReport aggregate(const std::vector<EvalResult>& results,
                          const std::map<std::string, std::vector<std::string>>& exclusions = {});

struct BenchResult {
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  int steps = 0;
};

/// Wall-clock per training step on random data with three markers.
BenchResult bench_step_time(Algorithm algorithm, Index hidden, Index shl, int steps = 1000,
                            int warmup = 50, std::uint64_t seed = 1);

}  // namespace forecast
