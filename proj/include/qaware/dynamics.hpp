#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "qaware/errors.hpp"
#include "qaware/gaussian.hpp"
#include "qaware/random.hpp"

namespace qaware {

/// Linear-Gaussian process x(t) = A x(t-1) + v(t) observed by N sensors,
/// y = H x + w, each reporting over a packet-erasure channel.
///
/// Invariants are checked on construction: consistent dimensions, symmetric
/// PSD noise covariances and erasure probabilities in [0, 1]. Sensor indices
/// are zero-based throughout the library.
class SystemModel {
 public:
  SystemModel(Eigen::MatrixXd A, Eigen::MatrixXd H, Eigen::MatrixXd sigma_v, Eigen::MatrixXd sigma_w,
              Eigen::VectorXd epsilon)
      : A_(std::move(A)),
        H_(std::move(H)),
        sigma_v_(std::move(sigma_v)),
        sigma_w_(std::move(sigma_w)),
        epsilon_(std::move(epsilon)) {
    validate();
    root_v_ = symmetric_sqrt(sigma_v_);
    root_w_ = symmetric_sqrt(sigma_w_);
  }

  [[nodiscard]] Eigen::Index state_dim() const { return A_.rows(); }
  [[nodiscard]] Eigen::Index sensor_count() const { return H_.rows(); }

  [[nodiscard]] const Eigen::MatrixXd& A() const { return A_; }
  [[nodiscard]] const Eigen::MatrixXd& H() const { return H_; }
  [[nodiscard]] const Eigen::MatrixXd& sigma_v() const { return sigma_v_; }
  [[nodiscard]] const Eigen::MatrixXd& sigma_w() const { return sigma_w_; }
  [[nodiscard]] const Eigen::VectorXd& epsilon() const { return epsilon_; }

  // Square roots used for sampling the noise terms.
  [[nodiscard]] const Eigen::MatrixXd& process_noise_root() const { return root_v_; }
  [[nodiscard]] const Eigen::MatrixXd& measurement_noise_root() const { return root_w_; }

  void check_sensor(std::size_t n) const {
    if (n >= static_cast<std::size_t>(sensor_count()))
      throw ConfigError("sensor index " + std::to_string(n) + " out of range [0, " +
                        std::to_string(sensor_count()) + ")");
  }

 private:
  void validate() const {
    const auto m = A_.rows();
    const auto n = H_.rows();
    if (m < 1 || A_.cols() != m) throw ConfigError("A must be a non-empty square matrix");
    if (n < 1 || H_.cols() != m) throw ConfigError("H must be N x M with N >= 1");
    if (sigma_v_.rows() != m || sigma_v_.cols() != m) throw ConfigError("sigma_v must be M x M");
    if (sigma_w_.rows() != n || sigma_w_.cols() != n) throw ConfigError("sigma_w must be N x N");
    if (epsilon_.size() != n) throw ConfigError("epsilon must have N entries");
    if (!is_psd(sigma_v_)) throw ConfigError("sigma_v must be symmetric positive semidefinite");
    if (!is_psd(sigma_w_)) throw ConfigError("sigma_w must be symmetric positive semidefinite");
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(epsilon_[i] >= 0.0 && epsilon_[i] <= 1.0))
        throw ConfigError("erasure probabilities must lie in [0, 1]");
  }

  Eigen::MatrixXd A_, H_, sigma_v_, sigma_w_;
  Eigen::VectorXd epsilon_;
  Eigen::MatrixXd root_v_, root_w_;
};

struct TrueState {
  Eigen::VectorXd x;
  std::int64_t t = 0;
};

inline TrueState step(const SystemModel& model, const TrueState& state, Rng& rng) {
  if (state.x.size() != model.state_dim()) throw ConfigError("state dimension does not match model");
  Eigen::VectorXd v = model.process_noise_root() * standard_normal_vector(model.state_dim(), rng);
  return {model.A() * state.x + v, state.t + 1};
}

/// Reading of sensor n: (H x)_n plus the n-th component of w ~ N(0, sigma_w).
/// The full noise vector is drawn so that stream consumption does not depend on n.
inline double observe(const SystemModel& model, const TrueState& state, std::size_t n, Rng& rng) {
  model.check_sensor(n);
  if (state.x.size() != model.state_dim()) throw ConfigError("state dimension does not match model");
  const auto row = static_cast<Eigen::Index>(n);
  Eigen::VectorXd w = model.measurement_noise_root() * standard_normal_vector(model.sensor_count(), rng);
  return model.H().row(row).dot(state.x) + w[row];
}

// True when the packet gets through (probability 1 - epsilon_n).
inline bool attempt_transmission(const SystemModel& model, std::size_t n, Rng& rng) {
  model.check_sensor(n);
  const double eps = model.epsilon()[static_cast<Eigen::Index>(n)];
  return uniform01(rng) >= eps;
}

/// Fixed point of S = A S A^T + sigma_v, by iteration from sigma_v.
/// Throws NumericError when A is not stable enough to converge.
inline Eigen::MatrixXd stationary_covariance(const SystemModel& model, double tol = 1e-10,
                                             int max_iter = 1'000'000) {
  Eigen::MatrixXd s = model.sigma_v();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = model.A() * s * model.A().transpose() + model.sigma_v();
    const double diff = (next - s).cwiseAbs().maxCoeff();
    s = symmetrized(next);
    if (!std::isfinite(diff)) break;
    if (diff <= tol) return s;
  }
  throw NumericError("stationary covariance iteration did not converge (is A stable?)");
}

}  // namespace qaware
