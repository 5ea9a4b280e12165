// forecast: command-line front end for the online marker-forecasting harness.
//
//   forecast run    --config experiment.json
//   forecast cv     --algo uoro --seq seq.csv --horizon 0.6 [--horizon 1.0 ...]
//   forecast bench  --algo uoro --q 90 --shl 9.0
//   forecast report --in out_dir
//   forecast synth  --out seq.csv --duration 200

#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "forecast/errors.hpp"
#include "forecast/harness.hpp"
#include "forecast/output.hpp"
#include "forecast/signal.hpp"

using namespace forecast;

namespace {

std::vector<Index> seconds_to_step_list(const std::vector<double>& seconds, double period) {
  std::vector<Index> out;
  for (double s : seconds) out.push_back(seconds_to_steps(s, period));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online forecasting of 3D marker trajectories with UORO/RTRL RNNs and baselines"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Full cross-validation + evaluation protocol from a config file");
  std::string config_path;
  bool quiet = false;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_flag("--quiet", quiet, "Suppress per-cell progress lines");

  // cv
  auto* cv = app.add_subcommand("cv", "Grid search on one sequence");
  std::string algo_name = "uoro", seq_path, out_dir;
  std::vector<double> horizons, etas, sigmas, shl_seconds;
  std::vector<Index> hidden;
  int n_cv = 50, n_test = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double sample_period = 0.0;
  cv->add_option("--algo", algo_name, "uoro | rtrl | lms | linreg | none");
  cv->add_option("--seq", seq_path, "Sequence CSV")->required()->check(CLI::ExistingFile);
  cv->add_option("--horizon", horizons, "Horizon(s) in seconds")->required();
  cv->add_option("--n-cv", n_cv, "Runs per tuple for stochastic methods");
  cv->add_option("--n-test", n_test, "Also evaluate the chosen tuple on the test set with this many runs");
  cv->add_option("--seed", seed, "Master seed");
  cv->add_option("--threads", threads, "Worker threads (0 = all cores)");
  cv->add_option("--eta", etas, "Override learning-rate grid");
  cv->add_option("--sigma", sigmas, "Override sigma_init grid");
  cv->add_option("--shl", shl_seconds, "Override signal-history-length grid (seconds)");
  cv->add_option("--q", hidden, "Override hidden-size grid");
  cv->add_option("--sample-period", sample_period, "Override the sampling period (s)");
  cv->add_option("--out", out_dir, "Write the grid surface CSV(s) here");

  // bench
  auto* bench = app.add_subcommand("bench", "Time one training step");
  std::string bench_algo = "uoro";
  Index bench_q = 90;
  double bench_shl = 9.0, bench_period = 0.1;
  int bench_steps = 1000;
  bench->add_option("--algo", bench_algo, "uoro | rtrl | lms | linreg");
  bench->add_option("--q", bench_q, "Hidden units");
  bench->add_option("--shl", bench_shl, "Signal history length (seconds)");
  bench->add_option("--sample-period", bench_period, "Sampling period (s)");
  bench->add_option("--steps", bench_steps, "Timed steps");

  // report
  auto* report = app.add_subcommand("report", "Re-aggregate a finished run directory");
  std::string report_dir;
  report->add_option("--in", report_dir, "Output directory of `forecast run`")->required()->check(CLI::ExistingDirectory);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic breathing-like sequence CSV");
  std::string synth_out;
  SyntheticSpec spec;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output CSV")->required();
  synth->add_option("--duration", spec.duration_s, "Seconds");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--noise", spec.noise_mm, "Noise std-dev (mm)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig config = load_config(config_path);
      const ExperimentSummary s = run_experiment(config, quiet ? nullptr : &std::cerr);
      print_report(s.report, std::cout);
      std::cout << "outputs written to " << config.output_dir.string() << '\n';
    } else if (*cv) {
      const Algorithm algo = parse_algorithm(algo_name);
      MarkerRecord record = load_record(seq_path);
      if (sample_period > 0.0) record.sample_period = sample_period;
      ExperimentConfig config = ExperimentConfig::defaults(algo);
      config.n_cv = n_cv;
      config.master_seed = seed;
      config.threads = threads;
      if (!etas.empty()) config.grid.eta = etas;
      if (!sigmas.empty()) config.grid.sigma_init = sigmas;
      if (!shl_seconds.empty()) config.grid.shl = seconds_to_step_list(shl_seconds, record.sample_period);
      if (!hidden.empty()) config.grid.hidden = hidden;

      for (double h_s : horizons) {
        const Index h = seconds_to_steps(h_s, record.sample_period);
        const CvResult r = grid_search(algo, record, h, config);
        const Hyper& best = r.chosen_hyper();
        std::cout << algo_name << " h=" << h_s << "s  chosen: q=" << best.hidden << " L=" << best.shl
                  << " eta=" << best.eta << " sigma_init=" << best.sigma_init
                  << "  cv_rmse=" << r.surface[r.chosen].mean_rmse << " mm\n";
        if (!out_dir.empty())
          write_grid_surface(r, std::filesystem::path(out_dir) /
                                    (algo_name + "__" + record.label + "__h" + std::to_string(h) + ".csv"));
        if (n_test > 0) {
          config.n_test = n_test;
          config.record_loss_trace = false;
          const EvalResult ev = evaluate(algo, record, best, h, config);
          std::cout << "  test:";
          for (const Metric m : kAllMetrics) {
            std::cout << ' ' << metric_name(m) << '=' << ev.stat(m).mean;
            if (ev.stat(m).half_range) std::cout << "+/-" << *ev.stat(m).half_range;
          }
          std::cout << '\n';
        }
      }
    } else if (*bench) {
      const Algorithm algo = parse_algorithm(bench_algo);
      const Index shl = seconds_to_steps(bench_shl, bench_period);
      const BenchResult b = bench_step_time(algo, bench_q, shl, bench_steps);
      std::cout << bench_algo << " q=" << bench_q << " L=" << shl << " steps: median "
                << std::setprecision(4) << b.median_ms << " ms/step (mean " << b.mean_ms
                << ", sd " << b.stddev_ms << ")\n";
    } else if (*report) {
      print_report(report_from_dir(report_dir), std::cout);
    } else if (*synth) {
      write_record(make_synthetic_record(spec, synth_seed), synth_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
