#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace forecast {

using Index = Eigen::Index;

/// Row-major so that consecutive time steps are contiguous in memory.
using PositionMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class BreathingClass { regular, irregular, unlabeled };

std::string to_string(BreathingClass c);
BreathingClass parse_breathing_class(const std::string& text);

/// Marker trajectories sampled at a fixed rate. Row t holds
/// (m1x, m1y, m1z, m2x, ...) in mm at time t * sample_period.
struct MarkerRecord {
  double sample_period = 0.1;
  int markers = 3;
  PositionMatrix positions;
  std::string label;
  BreathingClass breathing_class = BreathingClass::unlabeled;

  Index length() const { return positions.rows(); }
  Index channels() const { return positions.cols(); }
  double duration() const { return static_cast<double>(length()) * sample_period; }
};

/// Checks shape, positive period and finiteness; throws DataError.
void validate(const MarkerRecord& record);

/// Reads `t_seconds, m1x, m1y, m1z, ...` with a header row. The sampling
/// period is taken from the time column.
MarkerRecord load_record(const std::filesystem::path& path);
void write_record(const MarkerRecord& record, const std::filesystem::path& path);

/// Half-open range of time steps.
struct StepRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(Index k) const { return k >= begin && k < end; }
  friend bool operator==(const StepRange&, const StepRange&) = default;
};

/// Per-channel affine map to roughly [-1, 1]; frozen once fitted.
struct Normalizer {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  Eigen::VectorXd normalize(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::VectorXd denormalize(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  PositionMatrix normalize_all(const PositionMatrix& positions) const;
  PositionMatrix denormalize_all(const PositionMatrix& positions) const;
};

inline constexpr double kScaleFloor = 1e-6;

/// Midpoint / half-range over `window`. Constant channels get kScaleFloor
/// and a warning.
Normalizer fit_normalizer(const MarkerRecord& record, StepRange window);

/// One RNN input/target pair. input[0] is the bias entry.
struct WindowedSample {
  Eigen::VectorXd input;
  Eigen::VectorXd target;
  Index time_index = 0;
};

/// Input size m + 1 for a history of `shl` steps over `channels` coordinates.
inline Index input_size(Index channels, Index shl) { return channels * shl + 1; }

/// Builds u_n from steps n .. n+shl-1 and the target at step n+shl+horizon-1.
WindowedSample build_io(const MarkerRecord& record, const Normalizer& normalizer, Index shl,
                        Index horizon, Index n);

/// Same as above on an already normalized series; the hot path for trainers.
WindowedSample build_io(const PositionMatrix& normalized, Index shl, Index horizon, Index n);

/// Writes u_n into `input` without allocating. `input` must have the right size.
void fill_input(const PositionMatrix& normalized, Index shl, Index n,
                Eigen::Ref<Eigen::VectorXd> input);

enum class PartitionScheme { online_30_30, offline_54_6 };

struct Partition {
  StepRange train;
  StepRange cross_validation;
  StepRange test;
};

Index seconds_to_steps(double seconds, double sample_period);

/// Training / cross-validation boundaries at 30 s / 60 s (or 54 s / 60 s).
/// Throws std::invalid_argument if fewer than `min_test_steps` remain after 60 s.
Partition make_partition(const MarkerRecord& record, PartitionScheme scheme,
                         Index min_test_steps = 1);

struct ManifestEntry {
  std::filesystem::path file;
  std::string label;
  BreathingClass breathing_class = BreathingClass::unlabeled;
  double sampling_rate_hz = 10.0;
};

/// Sidecar JSON describing a dataset:
/// { "sequences": [ {"file", "label", "breathing_class", "sampling_rate_hz"} ],
///   "cohort_exclusions": { "irregular": ["label", ...] } }
struct Manifest {
  std::vector<ManifestEntry> sequences;
  std::map<std::string, std::vector<std::string>> cohort_exclusions;
};

/// Relative `file` entries are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

/// Loads a record and applies the manifest's label, class and sampling rate.
MarkerRecord load_record(const ManifestEntry& entry);

}  // namespace forecast

namespace forecast {

/// Breathing-like test signal: per coordinate, a fundamental plus a second
/// sinusoid, a linear drift and Gaussian noise.
struct SyntheticSpec {
  double duration_s = 200.0;
  double sample_period = 0.1;
  int markers = 3;
  double min_amplitude_mm = 5.0;
  double max_amplitude_mm = 20.0;
  double period_s = 4.0;
  double second_period_s = 2.3;
  double drift_mm_per_s = 0.01;
  double noise_mm = 0.05;
};

MarkerRecord make_synthetic_record(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace forecast
