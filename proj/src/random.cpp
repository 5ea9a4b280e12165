#include "forecast/random.hpp"

namespace forecast {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t v : path) h = mix_seed(h ^ mix_seed(v));
  return h;
}

void Rng::rademacher(Eigen::Ref<Eigen::VectorXd> out) {
  std::uint64_t bits = 0;
  int left = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (left == 0) {
      bits = engine_();
      left = 64;
    }
    out[i] = (bits & 1U) ? 1.0 : -1.0;
    bits >>= 1;
    --left;
  }
}

}  // namespace forecast
