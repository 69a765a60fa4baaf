#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaware/dqn.hpp"
#include "qaware/errors.hpp"
#include "qaware/harness.hpp"

// JSON configuration files.
//
//   {
//     "base": "periodic",                       optional built-in scenario
//     "model": { "A": [[..]], "H": [[..]], "sigma_v": [[..]],
//                "sigma_w": [[..]], "epsilon": [..] },
//     "clients": [ { "query": "max" | "mean" | "state" | "variance"
//                             | {"count_range": [a, b]},
//                    "alpha": 1.0,
//                    "process": {"type": "periodic", "period": 6, "phase": 0}
//                             | {"type": "memoryless", "p": 0.1667}
//                             | {"type": "markov", "transition": [[..]],
//                                "query_states": [0], "initial_state": 0} } ],
//     "run": { "episode_len": 100, "episodes": 10, "seed": 7,
//              "estimate_samples": 1000, "voi_observations": 200,
//              "voi_inner_samples": 500 },
//     "policy": { "name": "maf", "checkpoint": "dqn.bin" },
//     "train": { "gamma": 0.9, "episodes": 100, ... }
//   }
//
// Every section is optional when "base" is given; sections present replace
// the corresponding part of the base scenario.
namespace qaware::config {

using nlohmann::json;

struct LoadedConfig {
  Scenario scenario;
  std::optional<std::string> policy;
  std::optional<std::string> checkpoint;
  dqn::TrainConfig train;
};

namespace detail {

inline Eigen::MatrixXd matrix(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(std::string(what) + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline Eigen::VectorXd vector(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

}  // namespace detail

inline QueryKind parse_query(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "state") return StateQuery{};
    if (s == "mean") return MeanQuery{};
    if (s == "variance") return VarianceQuery{};
    if (s == "max") return MaxQuery{};
    throw ConfigError("unknown query '" + s + "' (valid: state, mean, variance, max, {count_range: [a, b]})");
  }
  if (j.is_object() && j.contains("count_range")) {
    const auto& r = j.at("count_range");
    if (!r.is_array() || r.size() != 2) throw ConfigError("count_range needs [a, b]");
    return count_range(r.at(0).get<double>(), r.at(1).get<double>());
  }
  throw ConfigError("query must be a name or {\"count_range\": [a, b]}");
}

inline ClientProcess parse_client(const json& j) {
  const QueryKind kind = parse_query(j.at("query"));
  const double alpha = j.value("alpha", 1.0);
  const json& p = j.at("process");
  const auto type = p.at("type").get<std::string>();
  if (type == "periodic") return make_periodic(p.at("period").get<int>(), p.value("phase", 0), kind, alpha);
  if (type == "memoryless") return make_memoryless(p.at("p").get<double>(), kind, alpha);
  if (type == "markov") {
    return ClientProcess(kind, alpha, detail::matrix(p.at("transition"), "transition"),
                         p.at("query_states").get<std::vector<std::size_t>>(), p.value("initial_state", std::size_t{0}),
                         p.value("initial_tau", std::int64_t{0}), p.value("tau_scale", 1.0));
  }
  throw ConfigError("unknown query process type '" + type + "' (valid: periodic, memoryless, markov)");
}

inline SystemModel parse_model(const json& j) {
  const Eigen::MatrixXd a = detail::matrix(j.at("A"), "A");
  const auto m = a.rows();
  const Eigen::MatrixXd h = j.contains("H") ? detail::matrix(j.at("H"), "H") : Eigen::MatrixXd::Identity(m, m);
  const auto n = h.rows();
  const Eigen::MatrixXd sw =
      j.contains("sigma_w") ? detail::matrix(j.at("sigma_w"), "sigma_w") : Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd eps =
      j.contains("epsilon") ? detail::vector(j.at("epsilon"), "epsilon") : Eigen::VectorXd::Zero(n);
  return SystemModel(a, h, detail::matrix(j.at("sigma_v"), "sigma_v"), sw, eps);
}

inline dqn::TrainConfig parse_train(const json& j, dqn::TrainConfig cfg = {}) {
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.episodes = j.value("episodes", cfg.episodes);
  cfg.episode_len = j.value("episode_len", cfg.episode_len);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.target_update_period = j.value("target_update_period", cfg.target_update_period);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.memory_capacity = j.value("memory_capacity", cfg.memory_capacity);
  cfg.temperature_start = j.value("temperature_start", cfg.temperature_start);
  cfg.temperature_decay = j.value("temperature_decay", cfg.temperature_decay);
  cfg.temperature_floor = j.value("temperature_floor", cfg.temperature_floor);
  cfg.seed = j.value("seed", cfg.seed);
  if (cfg.episodes < 1 || cfg.episode_len < 2 || cfg.batch < 1 || cfg.target_update_period < 1)
    throw ConfigError("invalid training configuration");
  return cfg;
}

inline LoadedConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  std::optional<Scenario> base;
  if (j.contains("base")) base = build_scenario(j.at("base").get<std::string>());
  if (!base && !(j.contains("model") && j.contains("clients")))
    throw ConfigError("configuration needs either \"base\" or both \"model\" and \"clients\"");

  SystemModel model = j.contains("model") ? parse_model(j.at("model")) : base->model;
  std::vector<ClientProcess> clients;
  if (j.contains("clients")) {
    for (const auto& c : j.at("clients")) clients.push_back(parse_client(c));
  } else {
    clients = base->clients;
  }
  if (clients.empty()) throw ConfigError("at least one client is required");
  Scenario scenario{base ? base->name : std::string("custom"), std::move(model), std::move(clients)};
  if (j.contains("name")) scenario.name = j.at("name").get<std::string>();

  if (j.contains("run")) {
    const auto& r = j.at("run");
    scenario.episode_len = r.value("episode_len", scenario.episode_len);
    scenario.episodes = r.value("episodes", scenario.episodes);
    scenario.seed = r.value("seed", scenario.seed);
    scenario.estimate_samples = r.value("estimate_samples", scenario.estimate_samples);
    scenario.voi.observations = r.value("voi_observations", scenario.voi.observations);
    scenario.voi.inner_samples = r.value("voi_inner_samples", scenario.voi.inner_samples);
  }
  if (scenario.episode_len < 1 || scenario.episodes < 1) throw ConfigError("episode length and count must be positive");

  LoadedConfig out{std::move(scenario), std::nullopt, std::nullopt, {}};
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    if (p.is_string()) {
      out.policy = p.get<std::string>();
    } else {
      out.policy = p.at("name").get<std::string>();
      if (p.contains("checkpoint")) out.checkpoint = p.at("checkpoint").get<std::string>();
    }
  }
  if (j.contains("train")) out.train = parse_train(j.at("train"));
  return out;
}

inline LoadedConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  try {
    return parse_config(json::parse(is));
  } catch (const json::exception& e) {
    throw ConfigError("bad config file " + path + ": " + e.what());
  }
}

}  // namespace qaware::config
