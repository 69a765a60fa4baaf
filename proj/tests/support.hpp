#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "qaware/dynamics.hpp"
#include "qaware/random.hpp"

namespace qaware::fixtures {

// Random SPD matrix with eigenvalues bounded away from zero.
inline Eigen::MatrixXd random_spd(Eigen::Index m, Rng& rng, double floor = 0.1) {
  const Eigen::MatrixXd g = standard_normal_matrix(m, m, rng);
  return g * g.transpose() / static_cast<double>(m) + floor * Eigen::MatrixXd::Identity(m, m);
}

// Random model with spectral radius below `radius`, H = I and random erasures.
inline SystemModel random_stable_model(Eigen::Index m, Rng& rng, double radius = 0.95) {
  Eigen::MatrixXd a = standard_normal_matrix(m, m, rng);
  const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
  a *= radius * uniform01(rng) / std::max(rho, 1e-9);
  Eigen::VectorXd eps(m);
  for (Eigen::Index i = 0; i < m; ++i) eps[i] = 0.3 * uniform01(rng);
  return SystemModel(a, Eigen::MatrixXd::Identity(m, m), random_spd(m, rng), random_spd(m, rng, 0.2).diagonal().asDiagonal().toDenseMatrix(),
                     eps);
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace qaware::fixtures

#include "qaware/dqn.hpp"

namespace qaware::fixtures {

struct GradientCheck {
  double relative_error = 0.0;
  double analytic_norm = 0.0;
};

// Analytic batch-loss gradient against central differences. Dropout masks
// are frozen by replaying the same generator seed for every evaluation.
inline GradientCheck gradient_check(const dqn::QNetwork& net, const std::vector<dqn::Experience>& batch,
                                    const std::vector<double>& targets, dqn::Mode mode, std::uint64_t mask_seed,
                                    double h = 1e-6) {
  std::vector<const dqn::Experience*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  auto grads = net.zero_gradients();
  Rng rng(mask_seed);
  dqn::batch_loss_and_gradient(net, ptrs, targets, mode, rng, &grads);
  const Eigen::VectorXd analytic = dqn::flatten(grads);

  dqn::QNetwork probe = net;
  const Eigen::VectorXd theta = net.flat_parameters();
  Eigen::VectorXd numeric(theta.size());
  auto loss_at = [&](const Eigen::VectorXd& p) {
    probe.set_flat_parameters(p);
    Rng replay(mask_seed);
    return dqn::batch_loss_and_gradient(probe, ptrs, targets, mode, replay, nullptr);
  };
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd p = theta;
    p[i] += h;
    const double up = loss_at(p);
    p[i] -= 2.0 * h;
    numeric[i] = (up - loss_at(p)) / (2.0 * h);
  }
  const double denom = std::max(analytic.norm() + numeric.norm(), 1e-12);
  return {(analytic - numeric).norm() / denom, analytic.norm()};
}

// Random small network, batch and targets for gradient checks.
struct GradientProblem {
  dqn::QNetwork net;
  std::vector<dqn::Experience> batch;
  std::vector<double> targets;
};

inline GradientProblem random_gradient_problem(Rng& rng, double dropout) {
  std::uniform_int_distribution<int> width(2, 7);
  std::vector<int> sizes{width(rng), width(rng), width(rng), width(rng)};
  GradientProblem p{dqn::QNetwork::initialized(sizes, dropout, rng), {}, {}};
  for (auto& layer : p.net.layers()) layer.bias.setConstant(0.5);
  const int b = width(rng);
  std::uniform_int_distribution<std::size_t> action(0, static_cast<std::size_t>(sizes.back() - 1));
  for (int i = 0; i < b; ++i) {
    p.batch.push_back({standard_normal_vector(sizes.front(), rng), action(rng), 0.0, {}});
    p.targets.push_back(-2.0 * uniform01(rng));
  }
  return p;
}

// Steps of Adam on one experience until the loss falls below `fraction` of
// its initial value; returns the step count or -1.
inline int overfit_steps(Rng& rng, double fraction = 0.01, int max_steps = 500) {
  dqn::QNetwork net = dqn::QNetwork::initialized({6, 10, 5, 3}, 0.0, rng);
  const dqn::Experience e{standard_normal_vector(6, rng), 1, -3.0, {}};
  const dqn::Experience* ptr = &e;
  const double target = -3.0;
  dqn::Adam adam(net);
  Rng unused(0);
  const double initial = dqn::batch_loss_and_gradient(net, {&ptr, 1}, {&target, 1}, dqn::Mode::eval, unused, nullptr);
  for (int step = 1; step <= max_steps; ++step) {
    auto grads = net.zero_gradients();
    dqn::batch_loss_and_gradient(net, {&ptr, 1}, {&target, 1}, dqn::Mode::train, unused, &grads);
    adam.step(net, grads, 1e-2);
    const double loss = dqn::batch_loss_and_gradient(net, {&ptr, 1}, {&target, 1}, dqn::Mode::eval, unused, nullptr);
    if (loss < fraction * initial) return step;
  }
  return -1;
}

}  // namespace qaware::fixtures
