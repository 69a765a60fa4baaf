#include <gtest/gtest.h>

#include "qaware/kalman.hpp"
#include "support.hpp"

using namespace qaware;

namespace {

SystemModel scalar_model(double a, double v, double w) {
  return SystemModel(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Identity(1, 1),
                     Eigen::MatrixXd::Constant(1, 1, v), Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Zero(1));
}

}  // namespace

TEST(Kalman, ScalarPredictUpdateByHand) {
  const SystemModel m = scalar_model(0.5, 1.0, 1.0);
  BeliefState b{Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Constant(1, 1, 4.0), Phase::posterior, 0};
  const BeliefState prior = predict(m, b);
  EXPECT_DOUBLE_EQ(prior.x_hat[0], 1.0);
  EXPECT_DOUBLE_EQ(prior.psi(0, 0), 2.0);  // 0.25 * 4 + 1
  EXPECT_EQ(prior.phase, Phase::prior);
  EXPECT_EQ(prior.t, 1);
  const BeliefState post = update(m, prior, 0, 4.0);
  // gain 2/3
  EXPECT_NEAR(post.x_hat[0], 1.0 + 2.0, 1e-12);
  EXPECT_NEAR(post.psi(0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(post.phase, Phase::posterior);
}

TEST(Kalman, ErasureIsIdentity) {
  Rng rng(4);
  const SystemModel m = fixtures::random_stable_model(4, rng);
  const BeliefState prior = predict(m, initial_belief(m));
  const BeliefState post = update(m, prior, 2, std::nullopt);
  EXPECT_EQ(post.x_hat, prior.x_hat);
  EXPECT_EQ(post.psi, prior.psi);
  EXPECT_EQ(post.phase, Phase::posterior);
}

TEST(Kalman, UpdateRequiresPrior) {
  const SystemModel m = scalar_model(0.5, 1.0, 1.0);
  EXPECT_THROW(update(m, initial_belief(m), 0, 1.0), std::logic_error);
}

TEST(Kalman, DegenerateInnovationThrows) {
  const SystemModel m = scalar_model(0.0, 0.0, 0.0);
  BeliefState b{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1), Phase::posterior, 0};
  EXPECT_THROW(update(m, predict(m, b), 0, 1.0), DegenerateUpdateError);
}

TEST(Kalman, CorrelatedComponentsShareInformation) {
  Eigen::MatrixXd sv(2, 2);
  sv << 1.0, 0.9, 0.9, 1.0;
  const SystemModel m(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2), sv,
                      Eigen::MatrixXd::Identity(2, 2) * 0.01, Eigen::VectorXd::Zero(2));
  const BeliefState prior = predict(m, initial_belief(m));
  const BeliefState post = update(m, prior, 0, 1.0);
  EXPECT_LT(post.psi(1, 1), prior.psi(1, 1));
  EXPECT_GT(post.x_hat[1], 0.5);
}

TEST(Kalman, InnovationVariance) {
  const SystemModel m = scalar_model(0.5, 1.0, 2.0);
  BeliefState b{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 3.0), Phase::prior, 1};
  EXPECT_DOUBLE_EQ(innovation_variance(m, b, 0), 5.0);
}

TEST(Kalman, PosteriorCovarianceMatchesJosephForm) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const SystemModel m = fixtures::random_stable_model(5, rng);
    BeliefState prior = predict(m, initial_belief(m));
    const auto n = static_cast<std::size_t>(trial % 5);
    const BeliefState post = update(m, prior, n, 0.3);
    const Eigen::RowVectorXd h = m.H().row(static_cast<Eigen::Index>(n));
    const double r = m.sigma_w()(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd k = prior.psi * h.transpose() / (h * prior.psi * h.transpose() + r);
    const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(5, 5) - k * h;
    const Eigen::MatrixXd joseph = ikh * prior.psi * ikh.transpose() + r * k * k.transpose();
    EXPECT_LT((post.psi - joseph).norm(), 1e-9 * joseph.norm());
  }
}

TEST(Kalman, FilterTracksSimulatedState) {
  Rng rng(21);
  const SystemModel m = fixtures::random_stable_model(3, rng, 0.9);
  BeliefState b = initial_belief(m);
  TrueState x{GaussianSampler(Eigen::VectorXd::Zero(3), b.psi).sample(rng), 0};
  double err = 0.0, predicted = 0.0;
  const int steps = 20000;
  for (int t = 0; t < steps; ++t) {
    x = step(m, x, rng);
    b = predict(m, b);
    const auto n = static_cast<std::size_t>(t % 3);
    b = update(m, b, n, observe(m, x, n, rng));
    err += (x.x - b.x_hat).squaredNorm();
    predicted += b.psi.trace();
  }
  EXPECT_NEAR(err / predicted, 1.0, 0.05);
}
