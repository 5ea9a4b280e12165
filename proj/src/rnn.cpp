#include "forecast/rnn.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "forecast/errors.hpp"

namespace forecast {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

constexpr std::array<char, 8> kMagic{'F', 'C', 'R', 'N', 'N', 'P', '0', '1'};

}  // namespace

RnnParams RnnParams::from_matrices(const Eigen::MatrixXd& wa, const Eigen::MatrixXd& wb,
                                   const Eigen::MatrixXd& wc) {
  require(wa.rows() == wa.cols(), "W_a must be square");
  require(wb.rows() == wa.rows() && wb.cols() >= 1, "W_b must have q rows");
  require(wc.cols() == wa.rows(), "W_c must have q columns");
  RnnParams p(RnnDims{wa.rows(), wb.cols() - 1, wc.rows()});
  p.wa() = wa;
  p.wb() = wb;
  p.wc() = wc;
  return p;
}

RnnParams RnnParams::unflatten(const RnnDims& dims, const Eigen::VectorXd& theta) {
  require(theta.size() == dims.param_count(), "flat parameter vector has the wrong length");
  RnnParams p(dims);
  p.theta_ = theta;
  return p;
}

RnnParams init_params(const RnnDims& dims, double sigma_init, Rng& rng) {
  require(sigma_init > 0.0, "sigma_init must be positive");
  RnnParams p(dims);
  for (Eigen::Index i = 0; i < p.flat().size(); ++i) p.flat()[i] = rng.gaussian(sigma_init);
  return p;
}

RnnParams init_params(const RnnDims& dims, double sigma_init, std::uint64_t seed) {
  Rng rng(seed);
  return init_params(dims, sigma_init, rng);
}

void forward_into(const RnnParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  StepCache& cache) {
  const RnnDims& d = params.dims();
  if (x.size() != d.hidden || u.size() != d.inputs + 1)
    throw std::invalid_argument("forward: state or input size does not match the network");
  cache.z.noalias() = params.wa() * x;
  cache.z.noalias() += params.wb() * u;
  cache.x_next = cache.z.array().tanh();
  cache.y.noalias() = params.wc() * cache.x_next;
}

StepCache forward(const RnnParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  StepCache c;
  forward_into(params, x, u, c);
  return c;
}

LossValue loss(const Eigen::VectorXd& y, const Eigen::VectorXd& y_star) {
  if (y.size() != y_star.size()) throw std::invalid_argument("loss: length mismatch");
  LossValue l;
  l.error = y_star - y;
  l.value = 0.5 * l.error.squaredNorm();
  return l;
}

Eigen::VectorXd tanh_prime(const Eigen::VectorXd& z) {
  return (1.0 - z.array().tanh().square()).matrix();
}

double clip_gradient_in_place(Eigen::Ref<Eigen::VectorXd> g, double tau) {
  require(tau > 0.0, "clip threshold must be positive");
  const double norm = g.norm();
  if (!(norm > tau)) return 1.0;
  const double scale = tau / norm;
  g *= scale;
  // Rounding can leave the product a few ulps above tau.
  const double after = g.norm();
  if (after > tau) g *= tau / after * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
  return scale;
}

Eigen::VectorXd clip_gradient(const Eigen::VectorXd& g, double tau) {
  Eigen::VectorXd out = g;
  clip_gradient_in_place(out, tau);
  return out;
}

void save_params(const RnnParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  const RnnDims& d = params.dims();
  for (const Eigen::Index v : {d.hidden, d.inputs, d.outputs}) {
    const auto u = static_cast<std::uint64_t>(v);
    out.write(reinterpret_cast<const char*>(&u), sizeof u);
  }
  out.write(reinterpret_cast<const char*>(params.flat().data()),
            static_cast<std::streamsize>(params.flat().size() * sizeof(double)));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

RnnParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + " is not an RNN checkpoint");
  std::array<std::uint64_t, 3> dims{};
  in.read(reinterpret_cast<char*>(dims.data()), sizeof dims);
  if (!in || dims[0] == 0 || dims[2] == 0) throw DataError(path.string() + ": bad header");
  RnnParams p(RnnDims{static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]),
                      static_cast<Eigen::Index>(dims[2])});
  in.read(reinterpret_cast<char*>(p.flat().data()),
          static_cast<std::streamsize>(p.flat().size() * sizeof(double)));
  if (!in) throw DataError(path.string() + ": truncated parameter block");
  return p;
}

}  // namespace forecast
