#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "forecast/errors.hpp"
#include "forecast/signal.hpp"

using namespace forecast;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "forecast_signal_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string error_of(const fs::path& p) {
  try {
    load_record(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

MarkerRecord ramp_record(Index steps, int markers = 3) {
  MarkerRecord r;
  r.markers = markers;
  r.positions.resize(steps, 3 * markers);
  for (Index t = 0; t < steps; ++t)
    for (Index c = 0; c < 3 * markers; ++c) r.positions(t, c) = 100.0 * c + t;
  return r;
}

/// Collects warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> seen;
  WarningHandler previous;
  WarningCapture() {
    previous = set_warning_handler([this](const std::string& m) { seen.push_back(m); });
  }
  ~WarningCapture() { set_warning_handler(previous); }
};

}  // namespace

TEST_CASE("load_record reads a 730-step, three-marker file") {
  const auto path = scratch("seq730.csv");
  {
    std::ofstream out(path);
    out << "t_seconds,m1x,m1y,m1z,m2x,m2y,m2z,m3x,m3y,m3z\n";
    for (int t = 0; t < 730; ++t) {
      out << t * 0.1;
      for (int c = 0; c < 9; ++c) out << ',' << (c + 1) * std::sin(0.1 * t + c);
      out << '\n';
    }
  }
  const MarkerRecord r = load_record(path);
  CHECK(r.length() == 730);
  CHECK(r.markers == 3);
  CHECK(r.channels() == 9);
  CHECK(r.sample_period == doctest::Approx(0.1));
  CHECK(r.label == "seq730");
  CHECK(r.positions(5, 2) == doctest::Approx(3 * std::sin(0.5 + 2)).epsilon(1e-5));
}

TEST_CASE("load_record reports malformed rows by number") {
  const std::string header = "t_seconds,m1x,m1y,m1z\n";
  const auto p = scratch("bad.csv");

  write_text(p, header + "0,1,2,3\n0.1,1,NaN,3\n");
  CHECK(error_of(p).find("row 3") != std::string::npos);

  write_text(p, header + "0,1,2,3\n0.1,1,2\n");
  CHECK(error_of(p).find("row 3") != std::string::npos);

  write_text(p, header + "0,1,2,3\n0.1,1,2,3\n0.2,1,abc,3\n");
  CHECK(error_of(p).find("row 4") != std::string::npos);

  write_text(p, header + "0,1,inf,3\n");
  CHECK(error_of(p).find("row 2") != std::string::npos);

  write_text(p, "");
  CHECK(error_of(p).find("empty") != std::string::npos);

  write_text(p, header);
  CHECK_FALSE(error_of(p).empty());

  write_text(p, "t,a,b\n0,1,2\n");
  CHECK_FALSE(error_of(p).empty());

  CHECK_THROWS_AS(load_record(scratch("does_not_exist.csv")), DataError);
}

TEST_CASE("write/load round trip preserves values") {
  MarkerRecord r = make_synthetic_record(SyntheticSpec{.duration_s = 20.0}, 9);
  const auto p1 = scratch("rt1.csv");
  const auto p2 = scratch("rt2.csv");
  write_record(r, p1);
  const MarkerRecord a = load_record(p1);
  write_record(a, p2);
  const MarkerRecord b = load_record(p2);
  CHECK(a.positions == r.positions);
  CHECK(b.positions == a.positions);
  CHECK(a.sample_period == doctest::Approx(r.sample_period).epsilon(1e-12));
}

TEST_CASE("fit_normalizer uses midpoint and half-range") {
  MarkerRecord r = ramp_record(21, 1);
  r.positions.col(0) = Eigen::VectorXd::LinSpaced(21, 10.0, 30.0);
  r.positions.col(1).setConstant(5.0);
  WarningCapture warnings;
  const Normalizer n = fit_normalizer(r, {0, 21});
  CHECK(n.offset[0] == doctest::Approx(20.0));
  CHECK(n.scale[0] == doctest::Approx(10.0));
  CHECK(n.offset[1] == 5.0);
  CHECK(n.scale[1] == kScaleFloor);
  REQUIRE(warnings.seen.size() == 1);
  CHECK(warnings.seen[0].find("channel 1") != std::string::npos);
  CHECK_THROWS_AS(fit_normalizer(r, {5, 5}), std::out_of_range);
  CHECK_THROWS_AS(fit_normalizer(r, {0, 22}), std::out_of_range);
}

TEST_CASE("normalized training window lies in [-1, 1]") {
  std::mt19937_64 g(21);
  for (int trial = 0; trial < 50; ++trial) {
    const MarkerRecord r = make_synthetic_record(SyntheticSpec{.duration_s = 30.0}, g());
    std::uniform_int_distribution<Index> pick(0, r.length() - 2);
    Index a = pick(g), b = pick(g);
    if (a > b) std::swap(a, b);
    const StepRange w{a, b + 1};
    const Normalizer n = fit_normalizer(r, w);
    CHECK((n.scale.array() > 0).all());
    for (Index t = w.begin; t < w.end; ++t) {
      const Eigen::VectorXd v = n.normalize(r.positions.row(t).transpose());
      CHECK(v.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("normalize/denormalize round trip") {
  std::mt19937_64 g(4);
  std::normal_distribution<double> gauss;
  std::lognormal_distribution<double> mag(0.0, 4.0);
  for (int trial = 0; trial < 500; ++trial) {
    Normalizer n;
    n.offset.resize(9);
    n.scale.resize(9);
    Eigen::VectorXd v(9);
    for (int c = 0; c < 9; ++c) {
      n.offset[c] = 50 * gauss(g);
      n.scale[c] = std::max(kScaleFloor, mag(g));
      v[c] = mag(g) * gauss(g);
    }
    const Eigen::VectorXd back = n.denormalize(n.normalize(v));
    for (int c = 0; c < 9; ++c)
      CHECK(std::abs(back[c] - v[c]) <= 1e-12 * std::max({std::abs(v[c]), std::abs(n.offset[c]), 1.0}));
  }
}

TEST_CASE("build_io layout") {
  const MarkerRecord r = ramp_record(10);
  Normalizer id;
  id.offset = Eigen::VectorXd::Zero(9);
  id.scale = Eigen::VectorXd::Ones(9);

  SUBCASE("L=1, h=1") {
    const WindowedSample s = build_io(r, id, 1, 1, 0);
    CHECK(s.input.size() == 10);
    CHECK(s.input[0] == 1.0);
    CHECK(s.target == r.positions.row(1).transpose());
    CHECK(s.time_index == 0);
  }
  SUBCASE("L=2 concatenates time steps, marker-major within each step") {
    const WindowedSample s = build_io(r, id, 2, 1, 0);
    CHECK(s.input.size() == 19);
    for (int c = 0; c < 9; ++c) {
      CHECK(s.input[1 + c] == r.positions(0, c));
      CHECK(s.input[10 + c] == r.positions(1, c));
    }
    CHECK(s.target == r.positions.row(2).transpose());
  }
  SUBCASE("target sits at n+L+h-1") {
    const WindowedSample s = build_io(r, id, 3, 4, 2);
    CHECK(s.target == r.positions.row(8).transpose());
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(build_io(r, id, 3, 6, 2), std::out_of_range);
    CHECK_THROWS_AS(build_io(r, id, 1, 1, -1), std::out_of_range);
    CHECK_THROWS_AS(build_io(r, id, 0, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_io(r, id, 1, 0, 0), std::invalid_argument);
  }
}

TEST_CASE("sliding windows overlap and targets reproduce the shifted record") {
  const MarkerRecord r = make_synthetic_record(SyntheticSpec{.duration_s = 12.0}, 3);
  const Normalizer n = fit_normalizer(r, {0, r.length()});
  const PositionMatrix z = n.normalize_all(r.positions);
  for (const Index L : {1, 2, 5}) {
    for (const Index h : {1, 3}) {
      const Index last = r.length() - L - h;
      for (Index k = 0; k <= last; ++k) {
        const WindowedSample s = build_io(z, L, h, k);
        CHECK(s.input[0] == 1.0);
        CHECK(s.target == z.row(k + L + h - 1).transpose());
        if (k < last) {
          const WindowedSample next = build_io(z, L, h, k + 1);
          const Index shared = 9 * (L - 1);
          CHECK(next.input.segment(1, shared) == s.input.segment(10, shared));
        }
      }
      // The record-based overload agrees with the pre-normalized fast path.
      const WindowedSample a = build_io(r, n, L, h, last);
      const WindowedSample b = build_io(z, L, h, last);
      CHECK((a.input - b.input).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("partitions") {
  SUBCASE("73 s online") {
    const MarkerRecord r = ramp_record(730);
    const Partition p = make_partition(r, PartitionScheme::online_30_30);
    CHECK(p.train == StepRange{0, 300});
    CHECK(p.cross_validation == StepRange{300, 600});
    CHECK(p.test == StepRange{600, 730});
  }
  SUBCASE("60 s leaves no test set") {
    CHECK_THROWS_AS(make_partition(ramp_record(600), PartitionScheme::online_30_30),
                    std::invalid_argument);
  }
  SUBCASE("offline 54/6") {
    const Partition p = make_partition(ramp_record(1000), PartitionScheme::offline_54_6);
    CHECK(p.cross_validation.size() == 60);
    CHECK(p.train.size() == 540);
  }
  SUBCASE("ranges tile the record") {
    for (const Index len : {601, 730, 3200})
      for (const auto scheme : {PartitionScheme::online_30_30, PartitionScheme::offline_54_6}) {
        const Partition p = make_partition(ramp_record(len), scheme);
        CHECK(p.train.begin == 0);
        CHECK(p.train.end == p.cross_validation.begin);
        CHECK(p.cross_validation.end == p.test.begin);
        CHECK(p.test.end == len);
        CHECK_FALSE(p.test.empty());
      }
  }
  SUBCASE("minimum test length") {
    CHECK_THROWS_AS(make_partition(ramp_record(610), PartitionScheme::online_30_30, 11),
                    std::invalid_argument);
    CHECK_NOTHROW(make_partition(ramp_record(611), PartitionScheme::online_30_30, 11));
  }
}

TEST_CASE("manifest") {
  const fs::path dir = scratch("manifest_dir").parent_path() / "manifest_dir";
  fs::create_directories(dir);
  write_record(ramp_record(700), dir / "a.csv");
  write_text(dir / "m.json", R"({"sequences": [
      {"file": "a.csv", "label": "seqA", "breathing_class": "irregular", "sampling_rate_hz": 10}],
      "cohort_exclusions": {"irregular": ["seqA"]}})");
  const Manifest m = load_manifest(dir / "m.json");
  REQUIRE(m.sequences.size() == 1);
  CHECK(m.sequences[0].file == dir / "a.csv");
  const MarkerRecord r = load_record(m.sequences[0]);
  CHECK(r.label == "seqA");
  CHECK(r.breathing_class == BreathingClass::irregular);
  CHECK(r.length() == 700);
  CHECK(m.cohort_exclusions.at("irregular") == std::vector<std::string>{"seqA"});

  write_text(dir / "bad.json", R"({"sequences": [{"label": "x"}]})");
  CHECK_THROWS_AS(load_manifest(dir / "bad.json"), DataError);
  write_text(dir / "bad2.json", "{not json");
  CHECK_THROWS_AS(load_manifest(dir / "bad2.json"), DataError);
  CHECK_THROWS_AS(parse_breathing_class("wheezy"), DataError);
}

TEST_CASE("synthetic records are deterministic and breathing-sized") {
  const SyntheticSpec spec;
  const MarkerRecord a = make_synthetic_record(spec, 5);
  const MarkerRecord b = make_synthetic_record(spec, 5);
  CHECK(a.positions == b.positions);
  CHECK(a.length() == 2000);
  CHECK(a.channels() == 9);
  CHECK(a.positions != make_synthetic_record(spec, 6).positions);
  const Eigen::VectorXd span =
      (a.positions.colwise().maxCoeff() - a.positions.colwise().minCoeff()).transpose();
  CHECK(span.minCoeff() > 5.0);
  CHECK(span.maxCoeff() < 2 * 2 * 20.0 + 5.0);
}
