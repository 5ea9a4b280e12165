#include "forecast/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "forecast/baselines.hpp"
#include "forecast/errors.hpp"
#include "forecast/rtrl.hpp"
#include "forecast/uoro.hpp"

namespace forecast {
namespace {

enum class Phase : std::uint64_t { cross_validation = 1, test = 2 };

std::uint64_t hyper_key(const Hyper& h) {
  return derive_seed({std::bit_cast<std::uint64_t>(h.eta),
                      std::bit_cast<std::uint64_t>(h.sigma_init),
                      static_cast<std::uint64_t>(h.shl), static_cast<std::uint64_t>(h.hidden)});
}

std::uint64_t run_seed(const ExperimentConfig& config, std::size_t sequence, Index horizon,
                       const Hyper& hyper, int run, Phase phase) {
  return derive_seed({config.master_seed, sequence, static_cast<std::uint64_t>(horizon),
                      hyper_key(hyper), static_cast<std::uint64_t>(run),
                      static_cast<std::uint64_t>(phase)});
}

/// Common face of the trainers inside the run loop.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual StepOutput step(const Eigen::VectorXd& u, const Eigen::VectorXd& y_star) = 0;
};

class UoroPredictor final : public Predictor {
 public:
  UoroPredictor(const RnnDims& dims, const UoroHyper& hyper, std::uint64_t seed)
      : hyper_(hyper), rng_(seed), state_(UoroState::initial(init_params(dims, hyper.sigma_init, rng_))) {}
  StepOutput step(const Eigen::VectorXd& u, const Eigen::VectorXd& y_star) override {
    return uoro_step(state_, u, y_star, hyper_, rng_);
  }

 private:
  UoroHyper hyper_;
  Rng rng_;
  UoroState state_;
};

class RtrlPredictor final : public Predictor {
 public:
  RtrlPredictor(const RnnDims& dims, double eta, double sigma_init, double tau, std::uint64_t seed)
      : eta_(eta), tau_(tau), state_(RtrlState::initial(init_params(dims, sigma_init, seed))) {}
  StepOutput step(const Eigen::VectorXd& u, const Eigen::VectorXd& y_star) override {
    return rtrl_step(state_, u, y_star, eta_, tau_);
  }

 private:
  double eta_;
  double tau_;
  RtrlState state_;
};

class LmsPredictor final : public Predictor {
 public:
  LmsPredictor(Index outputs, Index input_size, double eta, double tau)
      : filter_(LmsFilter::zeros(outputs, input_size, eta, tau)) {}
  StepOutput step(const Eigen::VectorXd& u, const Eigen::VectorXd& y_star) override {
    return lms_step(filter_, u, y_star);
  }

 private:
  LmsFilter filter_;
};

class LinregPredictor final : public Predictor {
 public:
  explicit LinregPredictor(LinearRegressor model) : model_(std::move(model)) {}
  StepOutput step(const Eigen::VectorXd& u, const Eigen::VectorXd& y_star) override {
    StepOutput out;
    out.prediction = predict_linreg(model_, u);
    out.loss = 0.5 * (y_star - out.prediction).squaredNorm();
    return out;
  }

 private:
  LinearRegressor model_;
};

LinearRegressor fit_on_range(const PositionMatrix& normalized, Index shl, Index horizon,
                             StepRange train) {
  // Samples whose target lies inside the training range.
  const Index count = train.end - shl - horizon + 1;
  if (count < 1) throw std::invalid_argument("training range too short for the history length");
  const Index m1 = input_size(normalized.cols(), shl);
  Eigen::MatrixXd u(count, m1);
  Eigen::MatrixXd y(count, normalized.cols());
  Eigen::VectorXd row(m1);
  for (Index n = 0; n < count; ++n) {
    fill_input(normalized, shl, n, row);
    u.row(n) = row.transpose();
    y.row(n) = normalized.row(n + shl + horizon - 1);
  }
  return fit_linreg(u, y);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = count;
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

RunOutput run_sequence_online(Algorithm algorithm, const MarkerRecord& record,
                              const Partition& partition, const Hyper& hyper, Index horizon,
                              std::uint64_t seed, StepRange scoring, double tau, bool keep_loss) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least one step");
  if (scoring.empty() || scoring.begin < 0 || scoring.end > record.length())
    throw std::invalid_argument("scoring range outside the record");
  const Index shl = algorithm == Algorithm::none ? 1 : hyper.shl;
  const Index first_n = scoring.begin - shl - horizon + 1;
  if (first_n < 0)
    throw std::invalid_argument("history length plus horizon reaches before the record start");

  RunOutput out;
  const Index p = record.channels();
  out.trace.first_step = scoring.begin;
  out.trace.truth = record.positions.middleRows(scoring.begin, scoring.size());
  out.trace.predicted.resize(scoring.size(), p);

  if (algorithm == Algorithm::none) {
    for (Index k = scoring.begin; k < scoring.end; ++k)
      out.trace.predicted.row(k - scoring.begin) =
          no_prediction(record, shl, horizon, k - shl - horizon + 1).transpose();
    return out;
  }

  const Normalizer norm = fit_normalizer(record, partition.train);
  const PositionMatrix normalized = norm.normalize_all(record.positions);
  const RnnDims dims = RnnDims::for_markers(hyper.hidden, record.markers, shl);

  std::unique_ptr<Predictor> model;
  Index start = 0;
  switch (algorithm) {
    case Algorithm::uoro:
      model = std::make_unique<UoroPredictor>(
          dims, UoroHyper{hyper.eta, tau, hyper.sigma_init, shl, hyper.hidden}, seed);
      break;
    case Algorithm::rtrl:
      model = std::make_unique<RtrlPredictor>(dims, hyper.eta, hyper.sigma_init, tau, seed);
      break;
    case Algorithm::lms:
      model = std::make_unique<LmsPredictor>(p, input_size(p, shl), hyper.eta, tau);
      break;
    case Algorithm::linreg:
      model = std::make_unique<LinregPredictor>(fit_on_range(normalized, shl, horizon, partition.train));
      start = first_n;
      break;
    case Algorithm::none:
      break;
  }

  const Index end_n = scoring.end - shl - horizon + 1;
  Eigen::VectorXd u(input_size(p, shl));
  if (keep_loss) out.loss.reserve(static_cast<std::size_t>(end_n - start));
  try {
    for (Index n = start; n < end_n; ++n) {
      fill_input(normalized, shl, n, u);
      const Index k = n + shl + horizon - 1;
      const StepOutput s = model->step(u, normalized.row(k).transpose());
      if (!std::isfinite(s.loss)) throw NumericalError("loss", n);
      if (keep_loss) out.loss.push_back(s.loss);
      if (k >= scoring.begin)
        out.trace.predicted.row(k - scoring.begin) = norm.denormalize(s.prediction).transpose();
    }
  } catch (const NumericalError& e) {
    out.diverged = true;
    out.divergence = e.what();
  }
  return out;
}

CvResult grid_search(Algorithm algorithm, const MarkerRecord& record, Index horizon,
                     const ExperimentConfig& config, std::size_t sequence_index) {
  const std::vector<Hyper> tuples = config.grid.tuples(algorithm);
  const Partition partition = make_partition(record, partition_scheme(algorithm));
  const int runs = is_stochastic(algorithm) ? config.n_cv : 1;

  std::vector<double> rmse_of(tuples.size() * static_cast<std::size_t>(runs),
                              std::numeric_limits<double>::quiet_NaN());
  parallel_for(rmse_of.size(), config.threads, [&](std::size_t task) {
    const std::size_t t = task / static_cast<std::size_t>(runs);
    const int r = static_cast<int>(task % static_cast<std::size_t>(runs));
    const std::uint64_t seed =
        run_seed(config, sequence_index, horizon, tuples[t], r, Phase::cross_validation);
    const RunOutput run = run_sequence_online(algorithm, record, partition, tuples[t], horizon,
                                              seed, partition.cross_validation, config.tau);
    if (!run.diverged) rmse_of[task] = rmse(run.trace);
  });

  CvResult result;
  result.horizon = horizon;
  bool any = false;
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    TupleScore s;
    s.hyper = tuples[t];
    std::vector<double> ok;
    for (int r = 0; r < runs; ++r) {
      const double v = rmse_of[t * static_cast<std::size_t>(runs) + static_cast<std::size_t>(r)];
      if (std::isfinite(v)) ok.push_back(v);
    }
    s.n_valid = static_cast<int>(ok.size());
    s.n_diverged = runs - s.n_valid;
    s.excluded = ok.empty();
    s.mean_rmse = s.excluded ? std::numeric_limits<double>::quiet_NaN() : mean_of(ok);
    if (s.excluded)
      warn("all runs diverged for " + to_string(algorithm) + " tuple " + std::to_string(t) +
           " on '" + record.label + "'; tuple excluded");
    result.surface.push_back(s);

    if (s.excluded) continue;
    const TupleScore& best = result.surface[result.chosen];
    if (!any || s.mean_rmse < best.mean_rmse ||
        (s.mean_rmse == best.mean_rmse && tie_break_less(s.hyper, best.hyper)))
      result.chosen = t;
    any = true;
  }
  if (!any)
    throw std::runtime_error("every hyper-parameter tuple diverged for " + to_string(algorithm) +
                             " on '" + record.label + "'");
  return result;
}

std::vector<CvResult> grid_search(Algorithm algorithm, const MarkerRecord& record,
                                  const std::vector<Index>& horizons,
                                  const ExperimentConfig& config, std::size_t sequence_index) {
  std::vector<CvResult> out;
  for (Index h : horizons) out.push_back(grid_search(algorithm, record, h, config, sequence_index));
  return out;
}

void summarize(EvalResult& result) {
  result.n_diverged = 0;
  for (const Metric m : kAllMetrics) {
    std::vector<double> values;
    for (const RunMetrics& r : result.runs)
      if (!r.diverged) values.push_back(r.metrics.get(m));
    MetricSummary& s = result.summary[static_cast<std::size_t>(m)];
    s = MetricSummary{};
    s.n_runs = static_cast<int>(values.size());
    if (values.empty()) {
      s.mean = std::numeric_limits<double>::quiet_NaN();
    } else if (values.size() == 1) {
      s.mean = values.front();
    } else {
      const CiSummary ci = ci_per_condition(values);
      s.mean = ci.mean;
      s.half_range = ci.half_range;
    }
  }
  for (const RunMetrics& r : result.runs) result.n_diverged += r.diverged ? 1 : 0;
}

EvalResult evaluate(Algorithm algorithm, const MarkerRecord& record, const Hyper& hyper,
                    Index horizon, const ExperimentConfig& config, std::size_t sequence_index) {
  const Partition partition = make_partition(record, partition_scheme(algorithm));
  const int runs = is_stochastic(algorithm) ? config.n_test : 1;

  EvalResult result;
  result.algorithm = algorithm;
  result.label = record.label;
  result.breathing_class = record.breathing_class;
  result.horizon = horizon;
  result.horizon_s = static_cast<double>(horizon) * record.sample_period;
  result.hyper = hyper;
  result.runs.resize(static_cast<std::size_t>(runs));

  std::vector<std::vector<double>> losses(static_cast<std::size_t>(runs));
  parallel_for(static_cast<std::size_t>(runs), config.threads, [&](std::size_t r) {
    RunMetrics& rm = result.runs[r];
    rm.run = static_cast<int>(r);
    rm.seed = run_seed(config, sequence_index, horizon, hyper, static_cast<int>(r), Phase::test);
    RunOutput run = run_sequence_online(algorithm, record, partition, hyper, horizon, rm.seed,
                                        partition.test, config.tau, config.record_loss_trace);
    rm.diverged = run.diverged;
    if (!run.diverged) {
      rm.metrics = compute_metrics(run.trace);
      losses[r] = std::move(run.loss);
    }
  });
  summarize(result);

  if (config.record_loss_trace) {
    int valid = 0;
    for (std::size_t r = 0; r < losses.size(); ++r) {
      if (result.runs[r].diverged || losses[r].empty()) continue;
      if (result.mean_loss.empty()) result.mean_loss.assign(losses[r].size(), 0.0);
      for (std::size_t i = 0; i < losses[r].size(); ++i) result.mean_loss[i] += losses[r][i];
      ++valid;
    }
    for (double& v : result.mean_loss) v /= std::max(valid, 1);
  }
  return result;
}

AggregateReport aggregate(const std::vector<EvalResult>& results,
                          const std::map<std::string, std::vector<std::string>>& exclusions) {
  if (results.empty()) throw std::invalid_argument("aggregate: no results");
  const auto hkey = [](double h) { return std::llround(h * 1e6); };

  std::vector<std::string> labels;
  std::map<std::string, BreathingClass> classes;
  std::set<long long> horizon_keys;
  std::map<std::pair<std::string, long long>, const EvalResult*> cells;
  for (const EvalResult& r : results) {
    if (r.algorithm != results.front().algorithm)
      throw std::invalid_argument("aggregate: results mix several algorithms");
    if (!classes.count(r.label)) labels.push_back(r.label);
    classes[r.label] = r.breathing_class;
    horizon_keys.insert(hkey(r.horizon_s));
    if (!cells.emplace(std::make_pair(r.label, hkey(r.horizon_s)), &r).second)
      throw std::invalid_argument("aggregate: duplicate cell for '" + r.label + "' at h = " +
                                  std::to_string(r.horizon_s) + " s");
  }
  std::vector<std::string> missing;
  for (const auto& l : labels)
    for (long long h : horizon_keys)
      if (!cells.count({l, h}))
        missing.push_back(l + "@" + std::to_string(static_cast<double>(h) * 1e-6) + "s");
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "aggregate: result grid incomplete, missing " << missing.size() << " cell(s):";
    for (const auto& m : missing) msg << ' ' << m;
    throw std::invalid_argument(msg.str());
  }

  AggregateReport report;
  report.algorithm = results.front().algorithm;

  const auto excluded = [&](const std::string& cohort, const std::string& label) {
    const auto it = exclusions.find(cohort);
    return it != exclusions.end() &&
           std::find(it->second.begin(), it->second.end(), label) != it->second.end();
  };
  const auto summarize_cells = [&](const std::vector<std::string>& members,
                                   const std::vector<long long>& hs) {
    std::array<AggregateStat, 5> stats{};
    for (const Metric m : kAllMetrics) {
      const auto mi = static_cast<std::size_t>(m);
      Eigen::MatrixXd halves(static_cast<Index>(members.size()), static_cast<Index>(hs.size()));
      double sum = 0.0;
      bool have_ci = true;
      for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = 0; j < hs.size(); ++j) {
          const MetricSummary& s = cells.at({members[i], hs[j]})->summary[mi];
          sum += s.mean;
          if (s.half_range)
            halves(static_cast<Index>(i), static_cast<Index>(j)) = *s.half_range;
          else
            have_ci = false;
        }
      stats[mi].mean = sum / static_cast<double>(members.size() * hs.size());
      if (have_ci) stats[mi].half_range = ci_aggregate(halves);
    }
    return stats;
  };

  const std::vector<long long> all_h(horizon_keys.begin(), horizon_keys.end());
  for (const char* cohort : {"all", "regular", "irregular"}) {
    CohortSummary c;
    c.cohort = cohort;
    for (const auto& l : labels) {
      const bool member = c.cohort == "all" ||
                          (c.cohort == "regular" && classes[l] == BreathingClass::regular) ||
                          (c.cohort == "irregular" && classes[l] == BreathingClass::irregular);
      if (member && !excluded(c.cohort, l)) c.labels.push_back(l);
    }
    if (c.labels.empty()) continue;
    c.stats = summarize_cells(c.labels, all_h);
    report.cohorts.push_back(std::move(c));
  }

  std::vector<std::string> curve_labels;
  for (const auto& l : labels)
    if (!excluded("all", l)) curve_labels.push_back(l);
  if (!curve_labels.empty())
    for (long long h : all_h) {
      const auto stats = summarize_cells(curve_labels, {h});
      CurvePoint p;
      p.horizon_s = static_cast<double>(h) * 1e-6;
      for (std::size_t i = 0; i < 5; ++i) {
        p.mean[i] = stats[i].mean;
        p.half_range[i] = stats[i].half_range;
      }
      report.curve.push_back(p);
    }
  return report;
}

BenchResult bench_step_time(Algorithm algorithm, Index hidden, Index shl, int steps, int warmup,
                            std::uint64_t seed) {
  if (hidden < 1 || shl < 1 || steps < 1) throw std::invalid_argument("bench: invalid dimensions");
  constexpr int markers = 3;
  const RnnDims dims = RnnDims::for_markers(hidden, markers, shl);
  const Index p = dims.outputs;

  Rng data(seed ^ 0x5eedULL);
  const int total = steps + warmup;
  std::vector<Eigen::VectorXd> inputs, targets;
  // A small pool of random samples, cycled.
  for (int i = 0; i < 16; ++i) {
    Eigen::VectorXd u(dims.inputs + 1);
    for (Index j = 0; j < u.size(); ++j) u[j] = data.gaussian(0.5);
    u[0] = 1.0;
    Eigen::VectorXd y(p);
    for (Index j = 0; j < p; ++j) y[j] = data.gaussian(0.5);
    inputs.push_back(std::move(u));
    targets.push_back(std::move(y));
  }

  std::unique_ptr<Predictor> model;
  switch (algorithm) {
    case Algorithm::uoro:
      model = std::make_unique<UoroPredictor>(dims, UoroHyper{0.1, 2.0, 0.02, shl, hidden}, seed);
      break;
    case Algorithm::rtrl:
      model = std::make_unique<RtrlPredictor>(dims, 0.05, 0.02, 2.0, seed);
      break;
    case Algorithm::lms:
      model = std::make_unique<LmsPredictor>(p, dims.inputs + 1, 0.01, 2.0);
      break;
    case Algorithm::linreg: {
      LinearRegressor lr;
      lr.weights = Eigen::MatrixXd::Zero(p, dims.inputs + 1);
      lr.fitted = true;
      model = std::make_unique<LinregPredictor>(lr);
      break;
    }
    case Algorithm::none:
      throw std::invalid_argument("bench: nothing to time for 'none'");
  }

  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < total; ++i) {
    const auto& u = inputs[static_cast<std::size_t>(i) % inputs.size()];
    const auto& y = targets[static_cast<std::size_t>(i) % targets.size()];
    const auto t0 = std::chrono::steady_clock::now();
    model->step(u, y);
    const auto t1 = std::chrono::steady_clock::now();
    if (i >= warmup) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  BenchResult b;
  b.steps = steps;
  b.mean_ms = mean_of(ms);
  double var = 0.0;
  for (double v : ms) var += (v - b.mean_ms) * (v - b.mean_ms);
  b.stddev_ms = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
  std::vector<double> sorted = ms;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  b.median_ms = sorted[sorted.size() / 2];
  return b;
}

}  // namespace forecast
