#include "forecast/output.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "forecast/errors.hpp"

namespace forecast {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (const char c : s)
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
  return out;
}

std::string cell_stem(Algorithm a, const std::string& label, Index horizon) {
  return to_string(a) + "__" + safe_name(label) + "__h" + std::to_string(horizon);
}

std::string opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::setprecision(17) << *v;
  return s.str();
}

json hyper_json(const Hyper& h) {
  return {{"eta", h.eta}, {"sigma_init", h.sigma_init}, {"shl_steps", h.shl}, {"hidden", h.hidden}};
}

Hyper hyper_from(const json& j) {
  return {j.at("eta").get<double>(), j.at("sigma_init").get<double>(),
          j.at("shl_steps").get<Index>(), j.at("hidden").get<Index>()};
}

}  // namespace

void write_run_metrics(const EvalResult& result, const fs::path& path) {
  auto out = open_out(path);
  out << "run,seed,diverged,mae,rmse,nrmse,max_error,jitter\n";
  for (const RunMetrics& r : result.runs) {
    out << r.run << ',' << r.seed << ',' << (r.diverged ? 1 : 0);
    for (const Metric m : kAllMetrics) {
      out << ',';
      if (!r.diverged) out << r.metrics.get(m);
    }
    out << '\n';
  }
}

void read_run_metrics(const fs::path& path, EvalResult& result) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  result.runs.clear();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 3) cells.resize(8);
    if (cells.size() != 8)
      throw DataError(path.string() + ": row " + std::to_string(row) + " malformed");
    try {
      RunMetrics r;
      r.run = std::stoi(cells[0]);
      r.seed = std::stoull(cells[1]);
      r.diverged = cells[2] == "1";
      if (!r.diverged) {
        r.metrics.mae = std::stod(cells[3]);
        r.metrics.rmse = std::stod(cells[4]);
        r.metrics.nrmse = std::stod(cells[5]);
        r.metrics.max_error = std::stod(cells[6]);
        r.metrics.jitter = std::stod(cells[7]);
      }
      result.runs.push_back(r);
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " is not numeric");
    }
  }
  summarize(result);
}

void write_grid_surface(const CvResult& cv, const fs::path& path) {
  auto out = open_out(path);
  out << "eta,sigma_init,shl_steps,hidden,mean_cv_rmse,n_valid,n_diverged,chosen\n";
  for (std::size_t i = 0; i < cv.surface.size(); ++i) {
    const TupleScore& s = cv.surface[i];
    out << s.hyper.eta << ',' << s.hyper.sigma_init << ',' << s.hyper.shl << ',' << s.hyper.hidden
        << ',';
    if (!s.excluded) out << s.mean_rmse;
    out << ',' << s.n_valid << ',' << s.n_diverged << ',' << (i == cv.chosen ? 1 : 0) << '\n';
  }
}

void write_summary(const AggregateReport& report, const fs::path& path) {
  auto out = open_out(path);
  out << "metric";
  for (const CohortSummary& c : report.cohorts)
    out << ',' << c.cohort << "_mean," << c.cohort << "_half_range";
  out << '\n';
  for (const Metric m : kAllMetrics) {
    out << metric_name(m);
    for (const CohortSummary& c : report.cohorts) {
      const AggregateStat& s = c.stats[static_cast<std::size_t>(m)];
      out << ',' << s.mean << ',' << opt(s.half_range);
    }
    out << '\n';
  }
}

void write_curve(const AggregateReport& report, const fs::path& path) {
  auto out = open_out(path);
  out << "horizon_s";
  for (const Metric m : kAllMetrics) out << ',' << metric_name(m) << ',' << metric_name(m) << "_half_range";
  out << '\n';
  for (const CurvePoint& p : report.curve) {
    out << p.horizon_s;
    for (std::size_t i = 0; i < 5; ++i) out << ',' << p.mean[i] << ',' << opt(p.half_range[i]);
    out << '\n';
  }
}

void write_loss_trace(const EvalResult& result, const fs::path& path) {
  auto out = open_out(path);
  out << "step,mean_loss\n";
  for (std::size_t i = 0; i < result.mean_loss.size(); ++i)
    out << i << ',' << result.mean_loss[i] << '\n';
}

void print_report(const AggregateReport& report, std::ostream& out) {
  out << to_string(report.algorithm) << '\n';
  out << std::left << std::setw(11) << "metric";
  for (const CohortSummary& c : report.cohorts)
    out << std::setw(26) << (c.cohort + " (" + std::to_string(c.labels.size()) + ")");
  out << '\n';
  for (const Metric m : kAllMetrics) {
    out << std::setw(11) << metric_name(m);
    for (const CohortSummary& c : report.cohorts) {
      const AggregateStat& s = c.stats[static_cast<std::size_t>(m)];
      std::ostringstream cell;
      cell << std::setprecision(4) << s.mean;
      if (s.half_range) cell << " +/- " << std::setprecision(2) << *s.half_range;
      out << std::setw(26) << cell.str();
    }
    out << '\n';
  }
}

ExperimentSummary run_experiment(const ExperimentConfig& config, std::ostream* log) {
  if (config.manifest.empty()) throw DataError("config has no manifest");
  const Manifest manifest = load_manifest(config.manifest);
  if (manifest.sequences.empty()) throw DataError("manifest lists no sequences");
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const Algorithm algo = config.algorithm;

  json run_manifest = {
      {"version", kVersion},
      {"algorithm", to_string(algo)},
      {"master_seed", config.master_seed},
      {"n_cv", config.n_cv},
      {"n_test", config.n_test},
      {"tau", config.tau},
      {"horizons_s", config.horizons_s},
      {"grid",
       {{"eta", config.grid.eta},
        {"sigma_init", config.grid.sigma_init},
        {"shl_steps", config.grid.shl},
        {"hidden", config.grid.hidden}}},
      {"cohort_exclusions", manifest.cohort_exclusions},
      {"sequences", json::array()},
      {"cells", json::array()},
  };

  ExperimentSummary summary;
  for (std::size_t i = 0; i < manifest.sequences.size(); ++i) {
    const MarkerRecord record = load_record(manifest.sequences[i]);
    const Partition part = make_partition(record, partition_scheme(algo));
    const Normalizer norm = fit_normalizer(record, part.train);
    run_manifest["sequences"].push_back({{"label", record.label},
                                         {"breathing_class", to_string(record.breathing_class)},
                                         {"sample_period", record.sample_period},
                                         {"length", record.length()},
                                         {"normalizer",
                                          {{"offset", std::vector<double>(norm.offset.begin(), norm.offset.end())},
                                           {"scale", std::vector<double>(norm.scale.begin(), norm.scale.end())}}}});

    for (const double h_s : config.horizons_s) {
      const Index h = seconds_to_steps(h_s, record.sample_period);
      if (h < 1) throw DataError("horizon " + std::to_string(h_s) + " s is shorter than one sample");
      const std::string stem = cell_stem(algo, record.label, h);

      CvResult cv = grid_search(algo, record, h, config, i);
      write_grid_surface(cv, dir / "cv" / (stem + ".csv"));
      EvalResult ev = evaluate(algo, record, cv.chosen_hyper(), h, config, i);
      ev.horizon_s = h_s;
      write_run_metrics(ev, dir / "runs" / (stem + ".csv"));
      if (config.record_loss_trace) write_loss_trace(ev, dir / "loss" / (stem + ".csv"));

      if (log)
        *log << '[' << to_string(algo) << "] " << record.label << " h=" << h_s << "s  q="
             << ev.hyper.hidden << " L=" << ev.hyper.shl << " eta=" << ev.hyper.eta
             << " sigma=" << ev.hyper.sigma_init << "  rmse=" << ev.stat(Metric::rmse).mean
             << (ev.n_diverged ? "  diverged=" + std::to_string(ev.n_diverged) : "") << '\n';

      run_manifest["cells"].push_back({{"label", record.label},
                                       {"breathing_class", to_string(record.breathing_class)},
                                       {"horizon_s", h_s},
                                       {"horizon_steps", h},
                                       {"hyper", hyper_json(ev.hyper)},
                                       {"n_diverged", ev.n_diverged},
                                       {"runs_file", "runs/" + stem + ".csv"}});
      summary.cross_validation.push_back(std::move(cv));
      summary.results.push_back(std::move(ev));
    }
  }

  summary.report = aggregate(summary.results, manifest.cohort_exclusions);
  write_summary(summary.report, dir / ("summary_" + to_string(algo) + ".csv"));
  write_curve(summary.report, dir / ("curve_" + to_string(algo) + ".csv"));
  auto mf = open_out(dir / "run_manifest.json");
  mf << run_manifest.dump(2) << '\n';
  return summary;
}

AggregateReport report_from_dir(const fs::path& dir) {
  std::ifstream in(dir / "run_manifest.json");
  if (!in) throw DataError("no run_manifest.json in " + dir.string());
  json m;
  try {
    in >> m;
    const Algorithm algo = parse_algorithm(m.at("algorithm"));
    std::vector<EvalResult> results;
    for (const json& c : m.at("cells")) {
      EvalResult r;
      r.algorithm = algo;
      r.label = c.at("label").get<std::string>();
      r.breathing_class = parse_breathing_class(c.at("breathing_class").get<std::string>());
      r.horizon_s = c.at("horizon_s").get<double>();
      r.horizon = c.at("horizon_steps").get<Index>();
      r.hyper = hyper_from(c.at("hyper"));
      read_run_metrics(dir / c.at("runs_file").get<std::string>(), r);
      results.push_back(std::move(r));
    }
    const auto exclusions =
        m.value("cohort_exclusions", std::map<std::string, std::vector<std::string>>{});
    AggregateReport report = aggregate(results, exclusions);
    write_summary(report, dir / ("summary_" + to_string(algo) + ".csv"));
    write_curve(report, dir / ("curve_" + to_string(algo) + ".csv"));
    return report;
  } catch (const json::exception& e) {
    throw DataError(dir.string() + "/run_manifest.json: " + e.what());
  }
}

}  // namespace forecast
