#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "qaware/dqn.hpp"
#include "support.hpp"

using namespace qaware;
using namespace qaware::dqn;

TEST(Dqn, Architecture) {
  EXPECT_EQ(hidden_width(20), 50);
  EXPECT_EQ(architecture(20, 2, 20), (std::vector<int>{422, 50, 20, 20}));
  EXPECT_EQ(architecture(3, 1, 3), (std::vector<int>{13, 8, 3, 3}));
}

TEST(Dqn, OperationCounts) {
  const std::vector<std::int64_t> benchmark{422, 50, 20, 20};
  EXPECT_EQ(count_operations(benchmark, 1), 45090);
  EXPECT_EQ(count_train(benchmark, 1, 128), 128 * 45090);
  const std::vector<std::int64_t> tiny{2, 3, 1};
  EXPECT_EQ(count_operations(tiny, 1), 3 * 5 + 1 * 7);
  EXPECT_EQ(count_operations(tiny, 0), 3 * 4 + 1 * 6);
}

TEST(Dqn, OutputsAreNonPositive) {
  Rng rng(1);
  const QNetwork net = QNetwork::initialized({5, 8, 4, 3}, 0.1, rng);
  for (int i = 0; i < 100; ++i) EXPECT_LE(net.forward(standard_normal_vector(5, rng)).maxCoeff(), 0.0);
}

TEST(Dqn, RejectsBadInput) {
  Rng rng(2);
  const QNetwork net = QNetwork::initialized({3, 4, 2}, 0.0, rng);
  EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(4)), ConfigError);
  EXPECT_THROW(net.forward(Eigen::Vector3d(1.0, std::nan(""), 0.0)), NumericError);
  EXPECT_THROW(QNetwork({3, 0, 2}, 0.0), ConfigError);
  EXPECT_THROW(QNetwork({3, 2}, 1.0), ConfigError);
}

TEST(Dqn, EvalModeIgnoresDropout) {
  Rng rng(3);
  const QNetwork net = QNetwork::initialized({4, 16, 3}, 0.5, rng);
  const Eigen::VectorXd s = standard_normal_vector(4, rng);
  Rng a(1), b(2);
  EXPECT_EQ(net.forward(s, Mode::eval, a), net.forward(s, Mode::eval, b));
}

TEST(Dqn, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = fixtures::random_gradient_problem(rng, trial % 2 ? 0.2 : 0.0);
    const auto check = fixtures::gradient_check(p.net, p.batch, p.targets, Mode::train, 100 + trial);
    EXPECT_LE(check.relative_error, 1e-4) << "trial " << trial;
  }
}

TEST(Dqn, SingleSampleOverfit) {
  Rng rng(5);
  const int steps = fixtures::overfit_steps(rng);
  EXPECT_GT(steps, 0);
  EXPECT_LE(steps, 500);
}

TEST(Dqn, AdamFirstStepMovesByLearningRate) {
  Rng rng(6);
  QNetwork net = QNetwork::initialized({3, 2}, 0.0, rng);
  const Eigen::VectorXd before = net.flat_parameters();
  auto grads = net.zero_gradients();
  grads[0].weight.setConstant(0.3);
  grads[0].weight(0, 0) = -5.0;
  grads[0].bias.setConstant(-0.01);
  Adam adam(net);
  adam.step(net, grads, 0.01);
  const Eigen::VectorXd delta = net.flat_parameters() - before;
  const Eigen::VectorXd g = flatten(grads);
  for (Eigen::Index i = 0; i < delta.size(); ++i) EXPECT_NEAR(delta[i], -0.01 * (g[i] > 0 ? 1.0 : -1.0), 1e-8);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Dqn, ReplayMemoryIsFifo) {
  ReplayMemory memory(3);
  for (int i = 0; i < 5; ++i) memory.push({Eigen::VectorXd::Zero(1), 0, static_cast<double>(i), {}});
  ASSERT_EQ(memory.size(), 3u);
  std::vector<double> rewards;
  for (std::size_t i = 0; i < memory.size(); ++i) rewards.push_back(memory[i].reward);
  std::sort(rewards.begin(), rewards.end());
  EXPECT_EQ(rewards, (std::vector<double>{2.0, 3.0, 4.0}));
  Rng rng(7);
  for (auto i : memory.sample_indices(100, rng)) EXPECT_LT(i, 3u);
  EXPECT_THROW(ReplayMemory(0), ConfigError);
}

TEST(Dqn, SoftmaxProperties) {
  const Eigen::Vector3d q(-1.0, -2.0, -0.5);
  const Eigen::VectorXd p = softmax(q, 1.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_EQ(greedy_action(p), 2u);
  EXPECT_LT((softmax(q.array() + 1000.0, 1.0) - p).norm(), 1e-12);
  EXPECT_GT(softmax(q, 0.01)[2], 1.0 - 1e-12);
  EXPECT_THROW(softmax(q, 0.0), std::invalid_argument);
  Rng rng(8);
  std::array<int, 3> counts{};
  for (int i = 0; i < 60000; ++i) ++counts[softmax_select(q, 1.0, rng)];
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(counts[a] / 60000.0, p[a], 0.01);
}

TEST(Dqn, TemperatureSchedule) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(c.temperature(0), 1.0);
  EXPECT_NEAR(c.temperature(10), std::pow(0.96, 10), 1e-15);
  EXPECT_DOUBLE_EQ(c.temperature(99), 0.05);
}

TEST(Dqn, TdTarget) {
  Rng rng(9);
  const QNetwork target = QNetwork::initialized({2, 4, 3}, 0.0, rng);
  const Experience e{Eigen::Vector2d(0.1, 0.2), 1, -0.7, Eigen::Vector2d(0.4, -0.3)};
  EXPECT_DOUBLE_EQ(td_target(e, target, 0.0), -0.7);
  EXPECT_DOUBLE_EQ(td_target(e, target, 0.9), -0.7 + 0.9 * target.forward(e.s_next).maxCoeff());
}

TEST(Dqn, TrainStepNeedsFullBatch) {
  Rng rng(10);
  QNetwork net = QNetwork::initialized({2, 4, 3}, 0.0, rng);
  const QNetwork target = net;
  TrainConfig c;
  c.batch = 4;
  ReplayMemory memory(10);
  Adam adam(net);
  for (int i = 0; i < 3; ++i) memory.push({Eigen::Vector2d(i, 1), 0, -1.0, Eigen::Vector2d(1, i)});
  EXPECT_FALSE(train_step(net, target, memory, c, adam, rng).has_value());
  memory.push({Eigen::Vector2d(3, 1), 2, -1.0, Eigen::Vector2d(1, 3)});
  EXPECT_TRUE(train_step(net, target, memory, c, adam, rng).has_value());
}

TEST(Dqn, CheckpointRoundTrip) {
  Rng rng(11);
  const QNetwork net = QNetwork::initialized({7, 5, 3}, 0.1, rng);
  const auto path = (std::filesystem::temp_directory_path() / "qaware_dqn_test.bin").string();
  TrainConfig c;
  save_checkpoint(path, net, {c.hash(), 42});
  CheckpointHeader h;
  const QNetwork back = load_checkpoint(path, &h);
  EXPECT_TRUE(back == net);
  EXPECT_EQ(parameter_hash(back), parameter_hash(net));
  EXPECT_EQ(h.seed, 42u);
  EXPECT_EQ(h.config_hash, c.hash());
  {
    std::ofstream os(path, std::ios::binary);
    os << "garbage";
  }
  EXPECT_THROW(load_checkpoint(path), ConfigError);
  std::remove(path.c_str());
}

TEST(Dqn, ConfigHashIgnoresSeed) {
  TrainConfig a, b;
  b.seed = 99;
  EXPECT_EQ(a.hash(), b.hash());
  b.learning_rate = 2e-4;
  EXPECT_NE(a.hash(), b.hash());
}
