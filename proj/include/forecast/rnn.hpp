#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Dense>

#include "forecast/random.hpp"

namespace forecast {

/// Shapes of a single-hidden-layer RNN. `inputs` excludes the bias entry,
/// so W_b has inputs + 1 columns.
struct RnnDims {
  Eigen::Index hidden = 0;   // q
  Eigen::Index inputs = 0;   // m
  Eigen::Index outputs = 0;  // p

  Eigen::Index wa_size() const { return hidden * hidden; }
  Eigen::Index wb_size() const { return hidden * (inputs + 1); }
  Eigen::Index wc_size() const { return outputs * hidden; }
  Eigen::Index param_count() const { return hidden * (outputs + hidden + inputs + 1); }

  Eigen::Index wb_offset() const { return wa_size(); }
  Eigen::Index wc_offset() const { return wa_size() + wb_size(); }

  /// Dimensions for `markers` 3D markers and a history of `shl` steps.
  static RnnDims for_markers(Eigen::Index hidden, int markers, Eigen::Index shl) {
    return {hidden, 3 * markers * shl, 3 * markers};
  }

  friend bool operator==(const RnnDims&, const RnnDims&) = default;
};

using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;

/// Weights stored as one flat vector [W_a | W_b | W_c], each block
/// column-major. The matrix accessors are views into that vector, so the
/// flat and matrix forms never drift apart.
class RnnParams {
 public:
  RnnParams() = default;
  explicit RnnParams(const RnnDims& dims)
      : dims_(dims), theta_(Eigen::VectorXd::Zero(dims.param_count())) {}

  static RnnParams from_matrices(const Eigen::MatrixXd& wa, const Eigen::MatrixXd& wb,
                                 const Eigen::MatrixXd& wc);
  static RnnParams unflatten(const RnnDims& dims, const Eigen::VectorXd& theta);

  const RnnDims& dims() const { return dims_; }

  const Eigen::VectorXd& flat() const { return theta_; }
  Eigen::VectorXd& flat() { return theta_; }
  Eigen::VectorXd flatten() const { return theta_; }

  ConstMatrixMap wa() const { return {theta_.data(), dims_.hidden, dims_.hidden}; }
  ConstMatrixMap wb() const {
    return {theta_.data() + dims_.wb_offset(), dims_.hidden, dims_.inputs + 1};
  }
  ConstMatrixMap wc() const {
    return {theta_.data() + dims_.wc_offset(), dims_.outputs, dims_.hidden};
  }
  MatrixMap wa() { return {theta_.data(), dims_.hidden, dims_.hidden}; }
  MatrixMap wb() { return {theta_.data() + dims_.wb_offset(), dims_.hidden, dims_.inputs + 1}; }
  MatrixMap wc() { return {theta_.data() + dims_.wc_offset(), dims_.outputs, dims_.hidden}; }

 private:
  RnnDims dims_;
  Eigen::VectorXd theta_;
};

/// Every weight i.i.d. N(0, sigma_init^2). Throws std::invalid_argument if sigma_init <= 0.
RnnParams init_params(const RnnDims& dims, double sigma_init, Rng& rng);
RnnParams init_params(const RnnDims& dims, double sigma_init, std::uint64_t seed);

struct StepCache {
  Eigen::VectorXd z;       // pre-activation W_a x + W_b u
  Eigen::VectorXd x_next;  // tanh(z)
  Eigen::VectorXd y;       // W_c x_next
};

StepCache forward(const RnnParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

/// Allocation-free variant used by the trainers; `cache` is resized on first use.
void forward_into(const RnnParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  StepCache& cache);

struct LossValue {
  Eigen::VectorXd error;  // y* - y
  double value = 0.0;     // 0.5 * |error|^2
};

LossValue loss(const Eigen::VectorXd& y, const Eigen::VectorXd& y_star);

Eigen::VectorXd tanh_prime(const Eigen::VectorXd& z);

/// Rescales g to norm tau when |g|_2 > tau; otherwise returns g untouched.
Eigen::VectorXd clip_gradient(const Eigen::VectorXd& g, double tau);

/// In-place form. Returns the applied scale factor (1 when not clipped).
double clip_gradient_in_place(Eigen::Ref<Eigen::VectorXd> g, double tau);

/// Binary checkpoint: 8-byte magic "FCRNNP01", then hidden, inputs, outputs
/// as little-endian uint64, then the flat parameter vector as little-endian
/// IEEE-754 doubles.
void save_params(const RnnParams& params, const std::filesystem::path& path);
RnnParams load_params(const std::filesystem::path& path);

}  // namespace forecast

namespace forecast {

/// What every online trainer reports for one time step.
struct StepOutput {
  Eigen::VectorXd prediction;
  double loss = 0.0;
};

}  // namespace forecast
