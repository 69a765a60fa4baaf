#include <gtest/gtest.h>

#include "qaware/dynamics.hpp"
#include "qaware/gaussian.hpp"
#include "qaware/harness.hpp"
#include "qaware/random.hpp"
#include "support.hpp"

using namespace qaware;

TEST(Gaussian, SymmetricSqrtSquaresBack) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd c = fixtures::random_spd(5, rng);
    const Eigen::MatrixXd r = symmetric_sqrt(c);
    EXPECT_LT((r * r - c).norm(), 1e-9);
    EXPECT_LT((r - r.transpose()).norm(), 1e-12);
  }
}

TEST(Gaussian, SqrtOfZeroIsZero) {
  EXPECT_EQ(symmetric_sqrt(Eigen::MatrixXd::Zero(3, 3)).norm(), 0.0);
}

TEST(Gaussian, SamplerMomentsMatch) {
  Rng rng(11);
  const Eigen::MatrixXd c = fixtures::random_spd(3, rng);
  const Eigen::VectorXd mu = Eigen::Vector3d(1.0, -2.0, 0.5);
  const Eigen::MatrixXd draws = GaussianSampler(mu, c).sample(200000, rng);
  const Eigen::VectorXd mean = draws.rowwise().mean();
  const Eigen::MatrixXd centered = draws.colwise() - mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(draws.cols() - 1);
  EXPECT_LT((mean - mu).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LT((cov - c).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Random, SeedTreeIsDeterministicAndDistinct) {
  const SeedTree a(7), b(7);
  EXPECT_EQ(a.derive("process"), b.derive("process"));
  EXPECT_NE(a.derive("process"), a.derive("channel"));
  EXPECT_NE(a.derive("query", 0), a.derive("query", 1));
  EXPECT_NE(SeedTree(7).derive("x"), SeedTree(8).derive("x"));
}

TEST(SystemModel, RejectsBadShapes) {
  const Eigen::MatrixXd i2 = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(SystemModel(Eigen::MatrixXd::Identity(2, 3), i2, i2, i2, Eigen::VectorXd::Zero(2)), ConfigError);
  EXPECT_THROW(SystemModel(i2, i2, i2, i2, Eigen::VectorXd::Zero(3)), ConfigError);
  Eigen::MatrixXd neg = i2;
  neg(0, 0) = -1.0;
  EXPECT_THROW(SystemModel(i2, i2, neg, i2, Eigen::VectorXd::Zero(2)), ConfigError);
  EXPECT_THROW(SystemModel(i2, i2, i2, i2, Eigen::VectorXd::Constant(2, 1.5)), ConfigError);
}

TEST(SystemModel, SensorIndexChecked) {
  const SystemModel m = benchmark_model();
  EXPECT_NO_THROW(m.check_sensor(19));
  EXPECT_THROW(m.check_sensor(20), ConfigError);
}

TEST(Dynamics, ZeroNoiseStepIsLinear) {
  const Eigen::MatrixXd a = (Eigen::MatrixXd(2, 2) << 0.5, 0.1, 0.0, 0.9).finished();
  const SystemModel m(a, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                      Eigen::VectorXd::Zero(2));
  Rng rng(1);
  const TrueState s{Eigen::Vector2d(1.0, 2.0), 0};
  const TrueState next = step(m, s, rng);
  EXPECT_NEAR(next.x[0], 0.7, 1e-15);
  EXPECT_NEAR(next.x[1], 1.8, 1e-15);
  EXPECT_EQ(next.t, 1);
  EXPECT_DOUBLE_EQ(observe(m, next, 1, rng), next.x[1]);
}

TEST(Dynamics, ErasureFrequency) {
  const SystemModel m = benchmark_model();
  Rng rng(5);
  int ok0 = 0, ok19 = 0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    ok0 += attempt_transmission(m, 0, rng);
    ok19 += attempt_transmission(m, 19, rng);
  }
  EXPECT_NEAR(ok0 / double(trials), 0.98, 0.003);
  EXPECT_NEAR(ok19 / double(trials), 0.96, 0.003);
}

TEST(Dynamics, ChannelExtremes) {
  const Eigen::MatrixXd i1 = Eigen::MatrixXd::Identity(1, 1);
  Rng rng(2);
  const SystemModel always(i1 * 0.5, i1, i1, i1, Eigen::VectorXd::Zero(1));
  const SystemModel never(i1 * 0.5, i1, i1, i1, Eigen::VectorXd::Ones(1));
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(attempt_transmission(always, 0, rng));
    EXPECT_FALSE(attempt_transmission(never, 0, rng));
  }
}

TEST(Dynamics, StationaryCovarianceSolvesLyapunov) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const SystemModel m = fixtures::random_stable_model(4, rng);
    const Eigen::MatrixXd p = stationary_covariance(m);
    EXPECT_LT((m.A() * p * m.A().transpose() + m.sigma_v() - p).norm(), 1e-8);
  }
}

TEST(Dynamics, ScalarStationaryVariance) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(1, 1, 0.5);
  const SystemModel m(a, Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Constant(1, 1, 3.0),
                      Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(stationary_covariance(m)(0, 0), 3.0 / 0.75, 1e-9);
}

TEST(Dynamics, UnstableModelHasNoStationaryCovariance) {
  const Eigen::MatrixXd i1 = Eigen::MatrixXd::Identity(1, 1);
  const SystemModel m(i1 * 1.1, i1, i1, i1, Eigen::VectorXd::Zero(1));
  EXPECT_THROW(stationary_covariance(m), NumericError);
}
