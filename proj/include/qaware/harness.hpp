#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qaware/dqn.hpp"
#include "qaware/dynamics.hpp"
#include "qaware/errors.hpp"
#include "qaware/kalman.hpp"
#include "qaware/policies.hpp"
#include "qaware/queries.hpp"
#include "qaware/query_process.hpp"
#include "qaware/random.hpp"

namespace qaware {

/// A complete simulation setup: process, channel, clients and run sizes.
struct Scenario {
  std::string name;
  SystemModel model;
  std::vector<ClientProcess> clients;
  int episode_len = 100;
  int episodes = 10;
  std::uint64_t seed = 1;
  int estimate_samples = kDefaultEstimateSamples;
  VoiSettings voi{};
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"periodic", "memoryless", "mixed", "periodic4"};
  return names;
}

// mod with a non-negative result, as in the matrix definitions below.
inline long positive_mod(long a, long m) { return ((a % m) + m) % m; }

/// The 20-sensor benchmark process: H = I, sparse coupled dynamics with
/// diagonal 3/4, correlated process noise, unit measurement noise and
/// erasure probability 0.02 ceil(n / 10).
inline SystemModel benchmark_model(int m = 20) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd sv = Eigen::MatrixXd::Zero(m, m);
  for (long i = 1; i <= m; ++i) {
    for (long j = 1; j <= m; ++j) {
      if (i == j) {
        a(i - 1, j - 1) = 0.75;
        sv(i - 1, j - 1) = (11.0 + static_cast<double>(positive_mod(i - 1, 10))) / 5.0;
      } else {
        if (positive_mod(i - 2 * j, 7) == 6) a(i - 1, j - 1) = -0.125;
        if (positive_mod(i - j, 6) == 0) sv(i - 1, j - 1) = 1.0;
      }
    }
  }
  Eigen::VectorXd eps(m);
  for (long n = 1; n <= m; ++n) eps[n - 1] = 0.02 * std::ceil(static_cast<double>(n) / 10.0);
  return SystemModel(a, Eigen::MatrixXd::Identity(m, m), sv, Eigen::MatrixXd::Identity(m, m), eps);
}

inline Scenario build_scenario(const std::string& name) {
  const QueryKind cnt = count_range(-5.0, 0.0);
  const QueryKind mx = MaxQuery{};
  std::vector<ClientProcess> clients;
  if (name == "periodic") {
    clients = {make_periodic(6, 2, cnt, 1.0), make_periodic(6, 0, mx, 1.0)};
  } else if (name == "memoryless") {
    clients = {make_memoryless(1.0 / 6.0, cnt, 1.0), make_memoryless(1.0 / 6.0, mx, 1.0)};
  } else if (name == "mixed") {
    clients = {make_periodic(6, 2, cnt, 1.0), make_memoryless(1.0 / 6.0, mx, 1.0)};
  } else if (name == "periodic4") {
    clients = {make_periodic(12, 2, cnt, 1.0), make_periodic(12, 0, mx, 1.0),
               make_periodic(12, 5, StateQuery{}, 1.0), make_periodic(12, 8, MeanQuery{}, 1.0)};
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + name + "' (valid: " + valid + ")");
  }
  return Scenario{name, benchmark_model(), std::move(clients)};
}

struct QueryRecord {
  std::size_t client = 0;
  Eigen::VectorXd estimate;
  Eigen::VectorXd truth;
  double squared_error = 0.0;
  double expected_mse = 0.0;
};

struct SlotRecord {
  std::int64_t slot = 0;
  std::size_t action = 0;
  bool erased = false;
  std::vector<QueryRecord> queries;  // one per active client
  double reward = 0.0;
  std::vector<std::int64_t> aoi;  // after this slot's reception
  double posterior_trace = 0.0;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::vector<SlotRecord> slots;
};

/// r = -sum over active clients of alpha_c * MSE_c.
inline double reward(const std::vector<QueryRecord>& active, const std::vector<ClientProcess>& clients) {
  double r = 0.0;
  for (const auto& q : active) r -= clients.at(q.client).alpha() * q.expected_mse;
  return r;
}

/// Slot-by-slot simulation of one episode, driven by an external scheduler.
///
/// Each slot runs in two halves. `begin_slot` advances the true state, runs
/// the Kalman prediction and moves the client chains, then exposes the
/// decision context. `finish_slot` polls the chosen sensor over the erasure
/// channel, updates the belief, answers every active query from the
/// posterior, computes the reward and ages the sensors.
class Environment {
 public:
  Environment(const Scenario& scenario, std::uint64_t episode_seed)
      : scenario_(scenario),
        clients_(scenario.clients),
        tree_(episode_seed),
        process_rng_(tree_.stream("process")),
        measurement_rng_(tree_.stream("measurement")),
        channel_rng_(tree_.stream("channel")),
        policy_rng_(tree_.stream("policy")),
        estimator_rng_(tree_.stream("estimator")),
        belief_(initial_belief(scenario.model)),
        aoi_(static_cast<std::size_t>(scenario.model.sensor_count()), 1) {
    if (scenario.episode_len < 1) throw ConfigError("episode length must be at least 1");
    for (std::size_t c = 0; c < clients_.size(); ++c) query_rngs_.push_back(tree_.stream("query", c));
    Rng init = tree_.stream("init");
    truth_ = TrueState{GaussianSampler(Eigen::VectorXd::Zero(scenario.model.state_dim()), belief_.psi).sample(init), 0};
  }

  [[nodiscard]] bool done() const { return slot_ >= scenario_.episode_len; }
  [[nodiscard]] std::int64_t slot() const { return slot_; }
  [[nodiscard]] const TrueState& truth() const { return truth_; }
  [[nodiscard]] const BeliefState& belief() const { return belief_; }
  [[nodiscard]] const std::vector<ClientProcess>& clients() const { return clients_; }
  [[nodiscard]] const Scenario& scenario() const { return scenario_; }
  [[nodiscard]] Rng& policy_rng() { return policy_rng_; }

  SchedulerContext begin_slot() {
    if (done()) throw std::logic_error("episode already finished");
    if (in_slot_) throw std::logic_error("slot already started");
    truth_ = step(scenario_.model, truth_, process_rng_);
    belief_ = predict(scenario_.model, belief_);
    views_.clear();
    for (std::size_t c = 0; c < clients_.size(); ++c) {
      clients_[c].advance(query_rngs_[c]);
      views_.push_back({clients_[c].kind(), clients_[c].alpha(), clients_[c].tau(), clients_[c].tau_scale()});
    }
    in_slot_ = true;
    return context();
  }

  [[nodiscard]] SchedulerContext context() const { return {belief_, aoi_, views_, slot_}; }

  SlotRecord finish_slot(std::size_t action) {
    if (!in_slot_) throw std::logic_error("finish_slot without begin_slot");
    const auto& model = scenario_.model;
    model.check_sensor(action);
    SlotRecord rec;
    rec.slot = slot_;
    rec.action = action;
    const bool delivered = attempt_transmission(model, action, channel_rng_);
    rec.erased = !delivered;
    std::optional<double> y;
    if (delivered) y = observe(model, truth_, action, measurement_rng_);
    belief_ = update(model, belief_, action, y);

    for (std::size_t c = 0; c < clients_.size(); ++c) {
      if (!clients_[c].active()) continue;
      const QueryEstimate est = estimate(clients_[c].kind(), belief_, scenario_.estimate_samples, estimator_rng_);
      QueryRecord q;
      q.client = c;
      q.estimate = est.value;
      q.truth = evaluate(clients_[c].kind(), truth_.x);
      q.squared_error = (q.estimate - q.truth).squaredNorm();
      q.expected_mse = est.expected_mse;
      rec.queries.push_back(std::move(q));
    }
    rec.reward = reward(rec.queries, clients_);

    for (std::size_t n = 0; n < aoi_.size(); ++n) aoi_[n] = (n == action && delivered) ? 1 : aoi_[n] + 1;
    rec.aoi = aoi_;
    rec.posterior_trace = belief_.psi.trace();
    in_slot_ = false;
    ++slot_;
    return rec;
  }

 private:
  const Scenario& scenario_;
  std::vector<ClientProcess> clients_;
  SeedTree tree_;
  Rng process_rng_, measurement_rng_, channel_rng_, policy_rng_, estimator_rng_;
  std::vector<Rng> query_rngs_;
  TrueState truth_;
  BeliefState belief_;
  std::vector<std::int64_t> aoi_;
  std::vector<ClientView> views_;
  std::int64_t slot_ = 0;
  bool in_slot_ = false;
};

inline std::uint64_t episode_seed(std::uint64_t master, int episode) {
  return SeedTree(master).derive("episode", static_cast<std::uint64_t>(episode));
}

inline EpisodeLog run_episode(const Scenario& scenario, const Policy& policy, std::uint64_t seed) {
  Environment env(scenario, seed);
  EpisodeLog log;
  log.seed = seed;
  log.slots.reserve(static_cast<std::size_t>(scenario.episode_len));
  while (!env.done()) {
    const SchedulerContext ctx = env.begin_slot();
    const std::size_t a = policy.decide(ctx, env.policy_rng());
    log.slots.push_back(env.finish_slot(a));
  }
  return log;
}

// Episodes 0..E-1 of the scenario; episode e always gets the same seed.
inline std::vector<EpisodeLog> run_episodes(const Scenario& scenario, const Policy& policy) {
  std::vector<EpisodeLog> logs;
  for (int e = 0; e < scenario.episodes; ++e) logs.push_back(run_episode(scenario, policy, episode_seed(scenario.seed, e)));
  return logs;
}

// ---------------------------------------------------------------------------
// Metrics

/// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct QueryMetrics {
  std::size_t client = 0;
  std::string kind;
  std::size_t count = 0;
  double mse_mean = 0.0;
  double mse_p5 = 0.0, mse_p25 = 0.0, mse_p50 = 0.0, mse_p75 = 0.0, mse_p95 = 0.0;
  double squared_error_mean = 0.0;  // realized (ground-truth) error
};

struct Metrics {
  std::vector<QueryMetrics> queries;  // one per client, in client order
  double overall_cost_mean = 0.0;     // mean of -r over slots with an active query
  std::size_t active_slots = 0;
  std::vector<double> aoi_mean;  // per sensor
  double state_mse_mean = 0.0;   // mean trace of the posterior covariance
};

/// Deterministic summary of a set of episodes. The per-query MSE is the
/// expected MSE the edge node reports with each answer.
inline Metrics aggregate(const std::vector<EpisodeLog>& logs, const std::vector<ClientProcess>& clients) {
  if (logs.empty()) throw std::invalid_argument("aggregate needs at least one episode");
  Metrics m;
  std::vector<std::vector<double>> mse(clients.size());
  std::vector<double> sq(clients.size(), 0.0);
  double cost = 0.0, trace = 0.0;
  std::size_t slots = 0;
  for (const auto& log : logs) {
    for (const auto& rec : log.slots) {
      if (m.aoi_mean.empty()) m.aoi_mean.assign(rec.aoi.size(), 0.0);
      for (std::size_t n = 0; n < rec.aoi.size(); ++n) m.aoi_mean[n] += static_cast<double>(rec.aoi[n]);
      trace += rec.posterior_trace;
      ++slots;
      if (!rec.queries.empty()) {
        cost -= rec.reward;
        ++m.active_slots;
      }
      for (const auto& q : rec.queries) {
        mse.at(q.client).push_back(q.expected_mse);
        sq[q.client] += q.squared_error;
      }
    }
  }
  if (slots == 0) throw std::invalid_argument("aggregate needs at least one slot");
  for (auto& a : m.aoi_mean) a /= static_cast<double>(slots);
  m.state_mse_mean = trace / static_cast<double>(slots);
  m.overall_cost_mean = m.active_slots ? cost / static_cast<double>(m.active_slots) : 0.0;
  for (std::size_t c = 0; c < clients.size(); ++c) {
    QueryMetrics q;
    q.client = c;
    q.kind = query_name(clients[c].kind());
    q.count = mse[c].size();
    if (!mse[c].empty()) {
      double sum = 0.0;
      for (double v : mse[c]) sum += v;
      q.mse_mean = sum / static_cast<double>(q.count);
      q.squared_error_mean = sq[c] / static_cast<double>(q.count);
      q.mse_p5 = percentile(mse[c], 0.05);
      q.mse_p25 = percentile(mse[c], 0.25);
      q.mse_p50 = percentile(mse[c], 0.50);
      q.mse_p75 = percentile(mse[c], 0.75);
      q.mse_p95 = percentile(mse[c], 0.95);
    }
    m.queries.push_back(q);
  }
  return m;
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_aggregate_header(std::ostream& os, std::size_t sensors) {
  os << "policy,scenario,query_kind,mse_mean,mse_p5,mse_p25,mse_p50,mse_p75,mse_p95,overall_cost_mean";
  for (std::size_t n = 1; n <= sensors; ++n) os << ",aoi_mean_" << n;
  os << '\n';
}

inline void write_aggregate_rows(std::ostream& os, const std::string& policy, const std::string& scenario,
                                 const Metrics& m) {
  const auto old = os.precision(10);
  for (const auto& q : m.queries) {
    os << policy << ',' << scenario << ',' << q.kind << ',' << q.mse_mean << ',' << q.mse_p5 << ',' << q.mse_p25
       << ',' << q.mse_p50 << ',' << q.mse_p75 << ',' << q.mse_p95 << ',' << m.overall_cost_mean;
    for (double a : m.aoi_mean) os << ',' << a;
    os << '\n';
  }
  os.precision(old);
}

namespace detail {
inline void write_joined(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
}
}  // namespace detail

// One row per slot; actions and sensors are 1-based.
inline void write_episode_csv(std::ostream& os, const std::vector<EpisodeLog>& logs) {
  const auto old = os.precision(10);
  std::size_t sensors = 0;
  for (const auto& log : logs)
    if (!log.slots.empty()) sensors = log.slots.front().aoi.size();
  os << "episode,slot,action,erased,reward,posterior_trace,active_clients";
  for (std::size_t n = 1; n <= sensors; ++n) os << ",aoi_" << n;
  os << '\n';
  for (std::size_t e = 0; e < logs.size(); ++e) {
    for (const auto& rec : logs[e].slots) {
      os << e << ',' << rec.slot << ',' << rec.action + 1 << ',' << (rec.erased ? 1 : 0) << ',' << rec.reward << ','
         << rec.posterior_trace << ',';
      for (std::size_t i = 0; i < rec.queries.size(); ++i) os << (i ? ";" : "") << rec.queries[i].client + 1;
      for (auto a : rec.aoi) os << ',' << a;
      os << '\n';
    }
  }
  os.precision(old);
}

// One row per answered query; vector-valued answers are ';'-joined.
inline void write_query_csv(std::ostream& os, const std::vector<EpisodeLog>& logs,
                            const std::vector<ClientProcess>& clients) {
  const auto old = os.precision(10);
  os << "episode,slot,client,query_kind,estimate,truth,squared_error,expected_mse\n";
  for (std::size_t e = 0; e < logs.size(); ++e) {
    for (const auto& rec : logs[e].slots) {
      for (const auto& q : rec.queries) {
        os << e << ',' << rec.slot << ',' << q.client + 1 << ',' << query_name(clients.at(q.client).kind()) << ',';
        detail::write_joined(os, q.estimate);
        os << ',';
        detail::write_joined(os, q.truth);
        os << ',' << q.squared_error << ',' << q.expected_mse << '\n';
      }
    }
  }
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Learning scheduler

/// Maps a decision context to the network input: psi_pri row-major, then
/// x_hat_pri, then one tau per client, each rescaled to order one.
class ObservationEncoder {
 public:
  explicit ObservationEncoder(const Scenario& scenario) {
    const Eigen::MatrixXd stationary = stationary_covariance(scenario.model);
    state_dim_ = scenario.model.state_dim();
    psi_scale_ = stationary.trace();
    x_scale_ = std::sqrt(stationary.trace() / static_cast<double>(state_dim_));
    for (const auto& c : scenario.clients) tau_scales_.push_back(c.tau_scale());
  }

  [[nodiscard]] Eigen::Index size() const {
    return state_dim_ * state_dim_ + state_dim_ + static_cast<Eigen::Index>(tau_scales_.size());
  }

  [[nodiscard]] Eigen::VectorXd encode(const SchedulerContext& ctx) const {
    const auto m = state_dim_;
    Eigen::VectorXd s(size());
    const auto& psi = ctx.belief_prior.psi;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) s[i * m + j] = psi(i, j) / psi_scale_;
    s.segment(m * m, m) = ctx.belief_prior.x_hat / x_scale_;
    for (std::size_t c = 0; c < tau_scales_.size(); ++c)
      s[m * m + m + static_cast<Eigen::Index>(c)] =
          std::min(static_cast<double>(ctx.clients[c].tau) / tau_scales_[c], kTauClip);
    return s;
  }

  static constexpr double kTauClip = 100.0;

 private:
  Eigen::Index state_dim_ = 0;
  double psi_scale_ = 1.0;
  double x_scale_ = 1.0;
  std::vector<double> tau_scales_;
};

// Greedy (temperature-floor) evaluation of a trained network.
class DqnPolicy final : public Policy {
 public:
  DqnPolicy(dqn::QNetwork net, const Scenario& scenario) : net_(std::move(net)), encoder_(scenario) {
    if (net_.input_size() != encoder_.size())
      throw ConfigError("network input size does not match the scenario observation size");
    if (net_.output_size() != scenario.model.sensor_count())
      throw ConfigError("network output size does not match the sensor count");
  }

  [[nodiscard]] std::size_t decide(const SchedulerContext& context, Rng&) const override {
    return dqn::greedy_action(net_.forward(encoder_.encode(context)));
  }
  [[nodiscard]] std::string name() const override { return "dqn"; }
  [[nodiscard]] const dqn::QNetwork& network() const { return net_; }

 private:
  dqn::QNetwork net_;
  ObservationEncoder encoder_;
};

struct TrainingEpisode {
  int episode = 0;
  double temperature = 0.0;
  double mean_reward = 0.0;
  double overall_cost = 0.0;  // mean -r over query slots
  double mean_loss = 0.0;     // NaN before training starts
  std::int64_t train_steps = 0;
};

struct TrainingResult {
  dqn::QNetwork network;
  std::vector<TrainingEpisode> curve;
};

/// Deep Q-learning on the scenario: softmax exploration with a decaying
/// temperature, one Adam step per environment step once the replay memory
/// holds a full batch, and a target-network copy every
/// `target_update_period` steps. A pure function of (scenario, config).
inline TrainingResult train_dqn(const Scenario& scenario, const dqn::TrainConfig& config,
                                const std::function<void(const TrainingEpisode&)>& progress = {}) {
  const SeedTree tree(config.seed);
  const ObservationEncoder encoder(scenario);
  const auto m = static_cast<int>(scenario.model.state_dim());
  const auto n = static_cast<int>(scenario.model.sensor_count());
  Rng init_rng = tree.stream("dqn.init");
  dqn::QNetwork update_net =
      dqn::QNetwork::initialized(dqn::architecture(m, static_cast<int>(scenario.clients.size()), n), config.dropout,
                                 init_rng);
  dqn::QNetwork target_net = update_net;
  dqn::Adam adam(update_net);
  dqn::ReplayMemory memory(config.memory_capacity);
  Rng explore_rng = tree.stream("dqn.explore");
  Rng train_rng = tree.stream("dqn.train");

  Scenario train_scenario = scenario;
  train_scenario.episode_len = config.episode_len;

  TrainingResult result;
  std::int64_t steps = 0;
  for (int ep = 0; ep < config.episodes; ++ep) {
    Environment env(train_scenario, tree.derive("train-episode", static_cast<std::uint64_t>(ep)));
    TrainingEpisode stats;
    stats.episode = ep;
    stats.temperature = config.temperature(ep);
    double reward_sum = 0.0, cost_sum = 0.0, loss_sum = 0.0;
    int active = 0, losses = 0;
    std::optional<dqn::Experience> pending;
    while (!env.done()) {
      const SchedulerContext ctx = env.begin_slot();
      Eigen::VectorXd s = encoder.encode(ctx);
      if (pending) {
        pending->s_next = s;
        memory.push(std::move(*pending));
        pending.reset();
      }
      const std::size_t a = dqn::softmax_select(update_net.forward(s), stats.temperature, explore_rng);
      const SlotRecord rec = env.finish_slot(a);
      reward_sum += rec.reward;
      if (!rec.queries.empty()) {
        cost_sum -= rec.reward;
        ++active;
      }
      pending = dqn::Experience{std::move(s), a, rec.reward, {}};

      if (auto loss = dqn::train_step(update_net, target_net, memory, config, adam, train_rng)) {
        loss_sum += *loss;
        ++losses;
        if (++steps % config.target_update_period == 0) dqn::sync_target(update_net, target_net);
      }
    }
    stats.mean_reward = reward_sum / static_cast<double>(config.episode_len);
    stats.overall_cost = active ? cost_sum / active : 0.0;
    stats.mean_loss = losses ? loss_sum / losses : std::nan("");
    stats.train_steps = steps;
    result.curve.push_back(stats);
    if (progress) progress(stats);
  }
  result.network = std::move(update_net);
  return result;
}

inline void write_training_curve(std::ostream& os, const std::vector<TrainingEpisode>& curve) {
  const auto old = os.precision(10);
  os << "episode,temperature,mean_reward,overall_cost,mean_loss,train_steps\n";
  for (const auto& e : curve)
    os << e.episode << ',' << e.temperature << ',' << e.mean_reward << ',' << e.overall_cost << ',' << e.mean_loss
       << ',' << e.train_steps << '\n';
  os.precision(old);
}



inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"maf",        "greedy-cnt",      "greedy-max", "greedy-state",
                                              "greedy-mean", "greedy-variance", "dqn"};
  return names;
}

/// Builds a non-learning scheduler by CLI name. greedy-cnt targets the
/// scenario's first count-range client (or [-5, 0] when there is none).
inline std::unique_ptr<Policy> make_benchmark_policy(const std::string& name, const Scenario& scenario) {
  if (name == "maf") return std::make_unique<MafPolicy>();
  auto greedy = [&](QueryKind kind) { return std::make_unique<GreedyVoiPolicy>(kind, scenario.model, scenario.voi); };
  if (name == "greedy-cnt") {
    for (const auto& c : scenario.clients)
      if (std::holds_alternative<CountRangeQuery>(c.kind())) return greedy(c.kind());
    return greedy(count_range(-5.0, 0.0));
  }
  if (name == "greedy-max") return greedy(MaxQuery{});
  if (name == "greedy-state") return greedy(StateQuery{});
  if (name == "greedy-mean") return greedy(MeanQuery{});
  if (name == "greedy-variance") return greedy(VarianceQuery{});
  std::string valid;
  for (const auto& n : policy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown policy '" + name + "' (valid: " + valid + ")");
}

// The greedy policy for each distinct query kind in the scenario, by CLI name.
inline std::vector<std::string> greedy_policies_for(const Scenario& scenario) {
  std::vector<std::string> names;
  for (const auto& c : scenario.clients) {
    const std::string n = "greedy-" + query_tag(c.kind());
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  }
  return names;
}

}  // namespace qaware
