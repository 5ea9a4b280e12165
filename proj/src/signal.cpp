#include "forecast/signal.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "forecast/errors.hpp"

namespace forecast {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const auto where = [&] {
    return "row " + std::to_string(row) + ", column " + std::to_string(col + 1);
  };
  if (cell.empty()) throw DataError("empty cell at " + where());
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE)
    throw DataError("non-numeric cell '" + cell + "' at " + where());
  if (!std::isfinite(v)) throw DataError("non-finite value '" + cell + "' at " + where());
  return v;
}

}  // namespace

std::string to_string(BreathingClass c) {
  switch (c) {
    case BreathingClass::regular: return "regular";
    case BreathingClass::irregular: return "irregular";
    case BreathingClass::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

BreathingClass parse_breathing_class(const std::string& text) {
  if (text == "regular") return BreathingClass::regular;
  if (text == "irregular") return BreathingClass::irregular;
  if (text == "unlabeled" || text.empty()) return BreathingClass::unlabeled;
  throw DataError("unknown breathing class '" + text + "'");
}

void validate(const MarkerRecord& record) {
  if (!(record.sample_period > 0.0)) throw DataError("sample period must be positive");
  if (record.markers < 1) throw DataError("record needs at least one marker");
  if (record.positions.cols() != 3 * record.markers)
    throw DataError("expected " + std::to_string(3 * record.markers) + " coordinate columns, got " +
                    std::to_string(record.positions.cols()));
  for (Index t = 0; t < record.positions.rows(); ++t)
    if (!record.positions.row(t).allFinite())
      throw DataError("non-finite coordinate at time step " + std::to_string(t));
}

MarkerRecord load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError(path.string() + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 4 || (header.size() - 1) % 3 != 0)
    throw DataError(path.string() + ": header must be t_seconds followed by x,y,z per marker");
  const std::size_t columns = header.size();

  std::vector<double> times;
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != columns)
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " columns, expected " +
                      std::to_string(columns));
    times.push_back(parse_cell(cells[0], row, 0));
    for (std::size_t c = 1; c < columns; ++c) values.push_back(parse_cell(cells[c], row, c));
  }
  if (times.empty()) throw DataError(path.string() + ": no data rows");

  MarkerRecord record;
  record.markers = static_cast<int>((columns - 1) / 3);
  record.positions = Eigen::Map<PositionMatrix>(values.data(), static_cast<Index>(times.size()),
                                                static_cast<Index>(columns - 1));
  record.label = path.stem().string();
  if (times.size() >= 2) {
    record.sample_period = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(record.sample_period > 0.0))
      throw DataError(path.string() + ": time column must be increasing");
  }
  validate(record);
  return record;
}

void write_record(const MarkerRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "t_seconds";
  for (int j = 1; j <= record.markers; ++j)
    for (const char axis : {'x', 'y', 'z'}) out << ",m" << j << axis;
  out << '\n' << std::setprecision(17);
  for (Index t = 0; t < record.length(); ++t) {
    out << static_cast<double>(t) * record.sample_period;
    for (Index c = 0; c < record.channels(); ++c) out << ',' << record.positions(t, c);
    out << '\n';
  }
}

Eigen::VectorXd Normalizer::normalize(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return ((v - offset).array() / scale.array()).matrix();
}

Eigen::VectorXd Normalizer::denormalize(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return (v.array() * scale.array() + offset.array()).matrix();
}

PositionMatrix Normalizer::normalize_all(const PositionMatrix& positions) const {
  PositionMatrix out = positions;
  out.rowwise() -= offset.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

PositionMatrix Normalizer::denormalize_all(const PositionMatrix& positions) const {
  PositionMatrix out = positions;
  out.array().rowwise() *= scale.transpose().array();
  out.rowwise() += offset.transpose();
  return out;
}

Normalizer fit_normalizer(const MarkerRecord& record, StepRange window) {
  if (window.empty() || window.begin < 0 || window.end > record.length())
    throw std::out_of_range("normalization window outside the record");
  const auto block = record.positions.middleRows(window.begin, window.size());
  const Eigen::VectorXd lo = block.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = block.colwise().maxCoeff().transpose();

  Normalizer n;
  n.offset = 0.5 * (lo + hi);
  n.scale = 0.5 * (hi - lo);
  for (Index c = 0; c < n.scale.size(); ++c) {
    if (n.scale[c] < kScaleFloor) {
      warn("channel " + std::to_string(c) + " of '" + record.label +
           "' is constant over the normalization window; scale floored");
      n.scale[c] = kScaleFloor;
    }
  }
  return n;
}

void fill_input(const PositionMatrix& normalized, Index shl, Index n,
                Eigen::Ref<Eigen::VectorXd> input) {
  const Index d = normalized.cols();
  input[0] = 1.0;
  input.tail(d * shl) = Eigen::Map<const Eigen::VectorXd>(normalized.data() + n * d, d * shl);
}

WindowedSample build_io(const PositionMatrix& normalized, Index shl, Index horizon, Index n) {
  if (shl < 1 || horizon < 0) throw std::invalid_argument("history length must be >= 1");
  if (n < 0 || n + shl + horizon - 1 >= normalized.rows())
    throw std::out_of_range("window [" + std::to_string(n) + ", " +
                            std::to_string(n + shl + horizon - 1) + "] exceeds record of length " +
                            std::to_string(normalized.rows()));
  WindowedSample s;
  s.time_index = n;
  s.input.resize(input_size(normalized.cols(), shl));
  fill_input(normalized, shl, n, s.input);
  s.target = normalized.row(n + shl + horizon - 1).transpose();
  return s;
}

WindowedSample build_io(const MarkerRecord& record, const Normalizer& normalizer, Index shl,
                        Index horizon, Index n) {
  if (shl < 1 || horizon < 1) throw std::invalid_argument("history length and horizon must be >= 1");
  if (n < 0 || n + shl + horizon - 1 >= record.length())
    throw std::out_of_range("window exceeds record");
  const Index last = n + shl + horizon;
  return build_io(normalizer.normalize_all(PositionMatrix(record.positions.topRows(last))), shl,
                  horizon, n);
}

Index seconds_to_steps(double seconds, double sample_period) {
  return static_cast<Index>(std::llround(seconds / sample_period));
}

Partition make_partition(const MarkerRecord& record, PartitionScheme scheme,
                         Index min_test_steps) {
  const Index dev_end = seconds_to_steps(60.0, record.sample_period);
  const Index train_end =
      seconds_to_steps(scheme == PartitionScheme::online_30_30 ? 30.0 : 54.0, record.sample_period);
  if (record.length() - dev_end < std::max<Index>(min_test_steps, 1))
    throw std::invalid_argument("record '" + record.label + "' lasts " +
                                std::to_string(record.duration()) +
                                " s; the test set after 60 s would be too short");
  return Partition{{0, train_end}, {train_end, dev_end}, {dev_end, record.length()}};
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }

  Manifest m;
  const auto base = path.parent_path();
  try {
    for (const auto& s : j.at("sequences")) {
      ManifestEntry e;
      e.file = s.at("file").get<std::string>();
      if (e.file.is_relative()) e.file = base / e.file;
      e.label = s.value("label", e.file.stem().string());
      e.breathing_class = parse_breathing_class(s.value("breathing_class", std::string{}));
      e.sampling_rate_hz = s.value("sampling_rate_hz", 10.0);
      if (!(e.sampling_rate_hz > 0.0)) throw DataError("sampling rate must be positive");
      m.sequences.push_back(std::move(e));
    }
    if (j.contains("cohort_exclusions"))
      m.cohort_exclusions =
          j.at("cohort_exclusions").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

MarkerRecord load_record(const ManifestEntry& entry) {
  MarkerRecord r = load_record(entry.file);
  r.label = entry.label;
  r.breathing_class = entry.breathing_class;
  r.sample_period = 1.0 / entry.sampling_rate_hz;
  return r;
}

}  // namespace forecast

#include "forecast/random.hpp"

namespace forecast {

MarkerRecord make_synthetic_record(const SyntheticSpec& spec, std::uint64_t seed) {
  if (!(spec.duration_s > 0.0) || !(spec.sample_period > 0.0) || spec.markers < 1)
    throw std::invalid_argument("invalid synthetic signal spec");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng.engine()); };

  const Index steps = static_cast<Index>(std::llround(spec.duration_s / spec.sample_period));
  const Index channels = 3 * spec.markers;
  constexpr double two_pi = 6.283185307179586;

  MarkerRecord r;
  r.sample_period = spec.sample_period;
  r.markers = spec.markers;
  r.label = "synthetic-" + std::to_string(seed);
  r.positions.resize(steps, channels);
  for (Index c = 0; c < channels; ++c) {
    const double a1 = uniform(spec.min_amplitude_mm, spec.max_amplitude_mm);
    const double a2 = uniform(0.2, 0.4) * a1;
    const double phase1 = uniform(0.0, two_pi);
    const double phase2 = uniform(0.0, two_pi);
    const double base = uniform(-50.0, 50.0);
    const double drift = spec.drift_mm_per_s * uniform(-1.0, 1.0);
    for (Index t = 0; t < steps; ++t) {
      const double s = static_cast<double>(t) * spec.sample_period;
      r.positions(t, c) = base + a1 * std::sin(two_pi * s / spec.period_s + phase1) +
                          a2 * std::sin(two_pi * s / spec.second_period_s + phase2) + drift * s +
                          (spec.noise_mm > 0.0 ? rng.gaussian(spec.noise_mm) : 0.0);
    }
  }
  return r;
}

}  // namespace forecast
