#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "forecast/errors.hpp"
#include "forecast/harness.hpp"

namespace forecast {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::uoro: return "uoro";
    case Algorithm::rtrl: return "rtrl";
    case Algorithm::lms: return "lms";
    case Algorithm::linreg: return "linreg";
    case Algorithm::none: return "none";
  }
  return "none";
}

Algorithm parse_algorithm(const std::string& text) {
  for (const Algorithm a : {Algorithm::uoro, Algorithm::rtrl, Algorithm::lms, Algorithm::linreg,
                            Algorithm::none})
    if (text == to_string(a)) return a;
  throw std::invalid_argument("unknown algorithm '" + text +
                              "' (expected uoro, rtrl, lms, linreg or none)");
}

PartitionScheme partition_scheme(Algorithm a) {
  return a == Algorithm::linreg ? PartitionScheme::offline_54_6 : PartitionScheme::online_30_30;
}

bool tie_break_less(const Hyper& a, const Hyper& b) {
  if (a.hidden != b.hidden) return a.hidden < b.hidden;
  if (a.shl != b.shl) return a.shl < b.shl;
  if (a.eta != b.eta) return a.eta < b.eta;
  return a.sigma_init < b.sigma_init;
}

HyperGrid HyperGrid::defaults(Algorithm a) {
  switch (a) {
    case Algorithm::uoro:
      return {{0.05, 0.1, 0.2}, {0.02, 0.05}, {10, 30, 50, 70, 90}, {10, 30, 50, 70, 90}};
    case Algorithm::rtrl:
      return {{0.02, 0.05, 0.1, 0.2}, {0.01, 0.02, 0.05}, {10, 25, 40, 55}, {10, 25, 40, 55}};
    case Algorithm::lms:
      return {{0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2}, {}, {10, 30, 50, 70, 90}, {}};
    case Algorithm::linreg:
      return {{}, {}, {10, 20, 30, 40, 50, 60, 70, 80, 90}, {}};
    case Algorithm::none:
      return {};
  }
  return {};
}

std::vector<Hyper> HyperGrid::tuples(Algorithm a) const {
  std::vector<Hyper> out;
  const auto need = [](bool empty, const char* what) {
    if (empty) throw std::invalid_argument(std::string("hyper-parameter grid has no ") + what);
  };
  switch (a) {
    case Algorithm::uoro:
    case Algorithm::rtrl:
      need(eta.empty(), "learning rates");
      need(sigma_init.empty(), "sigma_init values");
      need(shl.empty(), "history lengths");
      need(hidden.empty(), "hidden sizes");
      for (double e : eta)
        for (double s : sigma_init)
          for (Index l : shl)
            for (Index q : hidden) out.push_back({e, s, l, q});
      break;
    case Algorithm::lms:
      need(eta.empty(), "learning rates");
      need(shl.empty(), "history lengths");
      for (double e : eta)
        for (Index l : shl) out.push_back({e, 0.0, l, 0});
      break;
    case Algorithm::linreg:
      need(shl.empty(), "history lengths");
      for (Index l : shl) out.push_back({0.0, 0.0, l, 0});
      break;
    case Algorithm::none:
      out.push_back({});
      break;
  }
  for (const Hyper& h : out)
    if (h.shl < 1 || h.eta < 0.0 || h.sigma_init < 0.0 || h.hidden < 0 ||
        (is_stochastic(a) && (h.hidden < 1 || !(h.sigma_init > 0.0) || !(h.eta > 0.0))) ||
        (a == Algorithm::lms && !(h.eta > 0.0)))
      throw std::invalid_argument("hyper-parameter grid contains a non-positive value");
  return out;
}

ExperimentConfig ExperimentConfig::defaults(Algorithm algorithm) {
  ExperimentConfig c;
  c.algorithm = algorithm;
  c.grid = HyperGrid::defaults(algorithm);
  for (int i = 1; i <= 20; ++i) c.horizons_s.push_back(0.1 * i);
  return c;
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  try {
    ExperimentConfig c = ExperimentConfig::defaults(parse_algorithm(j.at("algorithm")));
    if (j.contains("horizons_s")) c.horizons_s = j["horizons_s"].get<std::vector<double>>();
    c.n_cv = j.value("n_cv", c.n_cv);
    c.n_test = j.value("n_test", c.n_test);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.tau = j.value("tau", c.tau);
    c.threads = j.value("threads", c.threads);
    c.record_loss_trace = j.value("record_loss_trace", c.record_loss_trace);
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (!base_dir.empty()) {
      if (!c.manifest.empty() && c.manifest.is_relative()) c.manifest = base_dir / c.manifest;
      if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("eta")) c.grid.eta = g["eta"].get<std::vector<double>>();
      if (g.contains("sigma_init")) c.grid.sigma_init = g["sigma_init"].get<std::vector<double>>();
      if (g.contains("shl_steps")) c.grid.shl = g["shl_steps"].get<std::vector<Index>>();
      if (g.contains("hidden")) c.grid.hidden = g["hidden"].get<std::vector<Index>>();
    }

    if (c.horizons_s.empty()) throw DataError("config: horizons_s is empty");
    for (double h : c.horizons_s)
      if (!(h > 0.0)) throw DataError("config: horizons must be positive");
    if (c.n_cv < 1 || c.n_test < 1) throw DataError("config: run counts must be >= 1");
    if (!(c.tau > 0.0)) throw DataError("config: tau must be positive");
    c.grid.tuples(c.algorithm);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace forecast
