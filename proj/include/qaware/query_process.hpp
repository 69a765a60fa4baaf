#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "qaware/errors.hpp"
#include "qaware/queries.hpp"
#include "qaware/random.hpp"

namespace qaware {

/// One client: a Markov chain over its hidden states that issues its query
/// whenever the chain sits in one of the query states.
///
/// tau counts slots since the last query and is 0 exactly in a query slot.
/// `tau_scale` is the typical inter-query time (the period, or the mean gap
/// for memoryless clients), used to normalize tau for learning agents.
class ClientProcess {
 public:
  ClientProcess(QueryKind kind, double alpha, Eigen::MatrixXd transition, std::vector<std::size_t> query_states,
                std::size_t initial_state, std::int64_t initial_tau, double tau_scale = 1.0)
      : kind_(kind),
        alpha_(alpha),
        transition_(std::move(transition)),
        is_query_(static_cast<std::size_t>(transition_.rows()), false),
        state_(initial_state),
        tau_(initial_tau),
        tau_scale_(tau_scale) {
    const auto q = transition_.rows();
    if (q < 1 || transition_.cols() != q) throw ConfigError("client transition matrix must be square and non-empty");
    for (Eigen::Index i = 0; i < q; ++i) {
      if ((transition_.row(i).array() < 0.0).any()) throw ConfigError("negative transition probability");
      if (std::abs(transition_.row(i).sum() - 1.0) > 1e-12) throw ConfigError("transition rows must sum to 1");
    }
    if (query_states.empty()) throw ConfigError("client needs at least one query state");
    for (auto s : query_states) {
      if (s >= is_query_.size()) throw ConfigError("query state out of range");
      is_query_[s] = true;
    }
    if (initial_state >= is_query_.size()) throw ConfigError("initial chain state out of range");
    if (!(alpha >= 0.0)) throw ConfigError("client weight must be non-negative");
    if (initial_tau < 0) throw ConfigError("tau must be non-negative");
    if (!(tau_scale > 0.0)) throw ConfigError("tau scale must be positive");
  }

  /// Moves the chain one slot. Returns whether the client queries this slot.
  bool advance(Rng& rng) {
    const double u = uniform01(rng);
    const auto row = transition_.row(static_cast<Eigen::Index>(state_));
    std::size_t next = static_cast<std::size_t>(row.size()) - 1;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      acc += row[j];
      if (u < acc) {
        next = static_cast<std::size_t>(j);
        break;
      }
    }
    // Guard against landing on a zero-probability tail state through rounding.
    while (row[static_cast<Eigen::Index>(next)] == 0.0 && next > 0) --next;
    state_ = next;
    active_ = is_query_[state_];
    tau_ = active_ ? 0 : tau_ + 1;
    return active_;
  }

  [[nodiscard]] const QueryKind& kind() const { return kind_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  void set_alpha(double alpha) { alpha_ = alpha; }
  [[nodiscard]] const Eigen::MatrixXd& transition() const { return transition_; }
  [[nodiscard]] bool is_query_state(std::size_t s) const { return is_query_.at(s); }
  [[nodiscard]] std::size_t chain_size() const { return is_query_.size(); }
  [[nodiscard]] std::size_t state() const { return state_; }
  [[nodiscard]] std::int64_t tau() const { return tau_; }
  [[nodiscard]] bool active() const { return active_; }
  [[nodiscard]] double tau_scale() const { return tau_scale_; }

 private:
  QueryKind kind_;
  double alpha_;
  Eigen::MatrixXd transition_;
  std::vector<bool> is_query_;
  std::size_t state_;
  std::int64_t tau_;
  double tau_scale_;
  bool active_ = false;
};

/// Deterministic cycle 0 -> 1 -> ... -> period-1 -> 0 with a query in state 0.
/// The first query fires at slot `phase`, and tau(t) = (t - phase) mod period.
inline ClientProcess make_periodic(int period, int phase, QueryKind kind, double alpha) {
  if (period < 1) throw ConfigError("period must be at least 1");
  if (phase < 0 || phase >= period) throw ConfigError("phase must lie in [0, period)");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(period, period);
  for (int i = 0; i < period; ++i) t(i, (i + 1) % period) = 1.0;
  // One advance happens before slot 0 is served.
  const int start = ((-phase - 1) % period + period) % period;
  const std::int64_t tau0 = ((-phase - 1) % period + period) % period;
  return ClientProcess(kind, alpha, std::move(t), {0}, static_cast<std::size_t>(start), tau0,
                       static_cast<double>(period));
}

// Two-state chain (0 idle, 1 query) with identical rows: query w.p. p each slot.
inline ClientProcess make_memoryless(double p, QueryKind kind, double alpha) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("query probability must lie in (0, 1]");
  Eigen::MatrixXd t(2, 2);
  t << 1.0 - p, p, 1.0 - p, p;
  return ClientProcess(kind, alpha, std::move(t), {1}, 0, 0, 1.0 / p);
}

/// Whether the time since the last query determines the next-slot query
/// probability, i.e. whether the client's chain is observable through tau.
///
/// Enumerates the sets of chain states compatible with each tau value
/// (starting from the query states at tau = 0) and requires the one-step
/// query probability to agree within each set.
inline bool is_fully_observable(const ClientProcess& client, double tol = 1e-12) {
  const auto& t = client.transition();
  const auto q = client.chain_size();
  auto query_prob = [&](std::size_t s) {
    double p = 0.0;
    for (std::size_t j = 0; j < q; ++j)
      if (client.is_query_state(j)) p += t(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
    return p;
  };

  std::set<std::size_t> current;
  for (std::size_t s = 0; s < q; ++s)
    if (client.is_query_state(s)) current.insert(s);
  std::set<std::set<std::size_t>> seen;
  while (!current.empty() && seen.insert(current).second) {
    const double p0 = query_prob(*current.begin());
    for (auto s : current)
      if (std::abs(query_prob(s) - p0) > tol) return false;
    std::set<std::size_t> next;
    for (auto s : current)
      for (std::size_t j = 0; j < q; ++j)
        if (!client.is_query_state(j) && t(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) > 0.0)
          next.insert(j);
    current = std::move(next);
  }
  return true;
}

}  // namespace qaware
