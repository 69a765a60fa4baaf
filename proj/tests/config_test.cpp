#include <gtest/gtest.h>

#include "qaware/config.hpp"

using namespace qaware;
using nlohmann::json;

TEST(Config, BaseWithOverrides) {
  const auto cfg = config::parse_config(json::parse(R"({
    "base": "periodic",
    "run": {"episodes": 3, "episode_len": 50, "seed": 9},
    "policy": {"name": "dqn", "checkpoint": "net.bin"},
    "train": {"episodes": 20, "learning_rate": 0.001}
  })"));
  EXPECT_EQ(cfg.scenario.name, "periodic");
  EXPECT_EQ(cfg.scenario.episodes, 3);
  EXPECT_EQ(cfg.scenario.episode_len, 50);
  EXPECT_EQ(cfg.scenario.seed, 9u);
  EXPECT_EQ(cfg.scenario.clients.size(), 2u);
  EXPECT_EQ(cfg.policy, "dqn");
  EXPECT_EQ(cfg.checkpoint, "net.bin");
  EXPECT_EQ(cfg.train.episodes, 20);
  EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.001);
  EXPECT_EQ(cfg.train.batch, 128);
}

TEST(Config, FullCustomScenario) {
  const auto cfg = config::parse_config(json::parse(R"({
    "model": {"A": [[0.5, 0.0], [0.1, 0.7]], "sigma_v": [[1.0, 0.2], [0.2, 1.0]], "epsilon": [0.1, 0.0]},
    "clients": [
      {"query": {"count_range": [-1, 1]}, "alpha": 2.0, "process": {"type": "periodic", "period": 4, "phase": 1}},
      {"query": "variance", "process": {"type": "memoryless", "p": 0.25}},
      {"query": "mean", "process": {"type": "markov", "transition": [[0, 1], [1, 0]], "query_states": [1]}}
    ]
  })"));
  EXPECT_EQ(cfg.scenario.name, "custom");
  EXPECT_EQ(cfg.scenario.model.state_dim(), 2);
  EXPECT_EQ(cfg.scenario.model.H(), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_DOUBLE_EQ(cfg.scenario.model.epsilon()[0], 0.1);
  ASSERT_EQ(cfg.scenario.clients.size(), 3u);
  EXPECT_DOUBLE_EQ(cfg.scenario.clients[0].alpha(), 2.0);
  EXPECT_TRUE(std::holds_alternative<VarianceQuery>(cfg.scenario.clients[1].kind()));
  EXPECT_FALSE(cfg.policy.has_value());
}

TEST(Config, Errors) {
  EXPECT_THROW(config::parse_config(json::parse(R"({"run": {}})")), ConfigError);
  EXPECT_THROW(config::parse_config(json::parse(R"({"base": "nope"})")), ConfigError);
  EXPECT_THROW(config::parse_config(json::parse(
                   R"({"base": "periodic", "clients": [{"query": "median", "process": {"type": "memoryless", "p": 0.5}}]})")),
               ConfigError);
  EXPECT_THROW(config::parse_config(json::parse(
                   R"({"base": "periodic", "clients": [{"query": "max", "process": {"type": "poisson"}}]})")),
               ConfigError);
  EXPECT_THROW(config::parse_config(json::parse(R"({"base": "periodic", "run": {"episodes": 0}})")), ConfigError);
  EXPECT_THROW(config::parse_config(json::parse(R"({"base": "periodic", "train": {"batch": 0}})")), ConfigError);
  EXPECT_THROW(config::load_config("/nonexistent/config.json"), ConfigError);
}
