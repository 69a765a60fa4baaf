#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "qaware/dynamics.hpp"
#include "qaware/errors.hpp"
#include "qaware/gaussian.hpp"

namespace qaware {

enum class Phase { prior, posterior };

/// Edge-node estimate of the process: mean x_hat and error covariance psi.
struct BeliefState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd psi;
  Phase phase = Phase::posterior;
  std::int64_t t = 0;

  void check_well_formed() const {
    if (psi.rows() != x_hat.size() || psi.cols() != x_hat.size())
      throw BeliefError("belief covariance does not match estimate dimension");
    if (!is_symmetric(psi)) throw BeliefError("belief covariance is not symmetric");
    if (!is_psd(psi)) throw BeliefError("belief covariance is not positive semidefinite");
  }
};

// Zero mean and the stationary covariance of the process.
inline BeliefState initial_belief(const SystemModel& model) {
  return {Eigen::VectorXd::Zero(model.state_dim()), stationary_covariance(model), Phase::posterior, 0};
}

inline BeliefState predict(const SystemModel& model, const BeliefState& belief) {
  if (belief.x_hat.size() != model.state_dim() || belief.psi.rows() != model.state_dim())
    throw ConfigError("belief dimension does not match model");
  BeliefState next;
  next.x_hat = model.A() * belief.x_hat;
  next.psi = symmetrized(model.A() * belief.psi * model.A().transpose() + model.sigma_v());
  next.phase = Phase::prior;
  next.t = belief.t + 1;
  return next;
}

inline double innovation_variance(const SystemModel& model, const BeliefState& prior, std::size_t n) {
  model.check_sensor(n);
  const auto h = model.H().row(static_cast<Eigen::Index>(n));
  const auto i = static_cast<Eigen::Index>(n);
  return h.dot(prior.psi * h.transpose()) + model.sigma_w()(i, i);
}

/// Scalar-observation update after polling sensor n. An absent observation
/// (erased packet) leaves the estimate untouched and only flips the phase.
/// The covariance update (I - k h) psi_pri does not depend on the value of y.
inline BeliefState update(const SystemModel& model, const BeliefState& prior, std::size_t n,
                          std::optional<double> observation) {
  if (prior.phase != Phase::prior) throw std::logic_error("update requires an a priori belief");
  model.check_sensor(n);
  BeliefState post = prior;
  post.phase = Phase::posterior;
  if (!observation) return post;

  const Eigen::RowVectorXd h = model.H().row(static_cast<Eigen::Index>(n));
  const Eigen::VectorXd psi_h = prior.psi * h.transpose();
  const double s = h.dot(psi_h) + model.sigma_w()(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (!(s > 1e-12)) throw DegenerateUpdateError("innovation variance is numerically zero");
  const Eigen::VectorXd k = psi_h / s;

  post.x_hat = prior.x_hat + k * (*observation - h.dot(prior.x_hat));
  const auto m = prior.psi.rows();
  post.psi = symmetrized((Eigen::MatrixXd::Identity(m, m) - k * h) * prior.psi);
  return post;
}

}  // namespace qaware
