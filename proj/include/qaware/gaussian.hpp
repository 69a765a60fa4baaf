#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "qaware/random.hpp"

namespace qaware {

inline constexpr double kSymmetryTol = 1e-9;
inline constexpr double kPsdTol = 1e-9;

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol = kSymmetryTol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Eigen::MatrixXd& m, double tol = kPsdTol) {
  return is_symmetric(m) && (m.size() == 0 || min_eigenvalue(m) >= -tol);
}

/// Symmetric square root S with S S^T = cov. Negative eigenvalues are clipped
/// at zero so singular (PSD) covariances are accepted.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov) {
  if (cov.size() == 0) return cov;
  if (cov.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(cov));
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Sampler for N(mean, cov) through the symmetric square root.
class GaussianSampler {
 public:
  GaussianSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov)
      : mean_(std::move(mean)), root_(symmetric_sqrt(cov)) {}

  [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }
  [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& root() const { return root_; }

  [[nodiscard]] Eigen::VectorXd sample(Rng& rng) const {
    return mean_ + root_ * standard_normal_vector(dim(), rng);
  }

  // M x count matrix, one draw per column.
  [[nodiscard]] Eigen::MatrixXd sample(Eigen::Index count, Rng& rng) const {
    Eigen::MatrixXd draws = root_ * standard_normal_matrix(dim(), count, rng);
    draws.colwise() += mean_;
    return draws;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd root_;
};

}  // namespace qaware
