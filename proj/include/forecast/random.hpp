#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace forecast {

/// splitmix64 finalizer; used to derive independent per-run seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Order-sensitive hash of a seed path, e.g. (master, sequence, horizon, tuple, run).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> path);

/// Per-run random stream. Each trainer owns one; nothing is shared.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  double gaussian(double stddev) {
    return std::normal_distribution<double>(0.0, stddev)(engine_);
  }

  /// Independent uniform signs in {-1, +1}.
  void rademacher(Eigen::Ref<Eigen::VectorXd> out);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace forecast
