#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "qaware/errors.hpp"

// Two independent binary Markov chains, each watched by one error-free
// sensor, with a single client querying every slot. Small enough to solve
// the scheduling problem exactly over the state (ages, last observations).
namespace qaware::toy {

struct ToyModel {
  std::array<double, 2> flip{0.1, 0.2};  // per-chain state change probability
  int delta_max = 20;
  double gamma = 0.9;

  void validate() const {
    for (double p : flip)
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("flip probabilities must lie in (0, 1)");
    if (delta_max < 2) throw ConfigError("age cap must be at least 2");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  }
};

enum class ToyQuery { max, count };

struct ToyState {
  std::array<int, 2> age{1, 1};
  std::array<int, 2> obs{0, 0};
};

/// Distribution (P[0], P[1]) of a chain observed as `o` exactly `delta` steps ago.
inline std::array<double, 2> posterior(double p, int delta, int o) {
  const double r = std::pow(1.0 - 2.0 * p, delta);
  const double same = 0.5 * (1.0 + r);
  const double other = 0.5 * (1.0 - r);
  return o == 0 ? std::array<double, 2>{same, other} : std::array<double, 2>{other, same};
}

struct Responses {
  double z_max = 0.0;
  double z_count = 0.0;
  double mse_max = 0.0;
  double mse_count = 0.0;
};

inline Responses mmse_responses(const ToyModel& model, const ToyState& s) {
  const auto p1 = posterior(model.flip[0], s.age[0], s.obs[0]);
  const auto p2 = posterior(model.flip[1], s.age[1], s.obs[1]);
  const double both_zero = p1[0] * p2[0];
  Responses r;
  r.z_max = 1.0 - both_zero;
  r.z_count = p1[1] + p2[1];
  r.mse_max = both_zero * (1.0 - both_zero);
  r.mse_count = p1[0] + p2[0] - p1[0] * p1[0] - p2[0] * p2[0];
  return r;
}

inline double query_mse(const ToyModel& model, const ToyState& s, ToyQuery q) {
  const auto r = mmse_responses(model, s);
  return q == ToyQuery::max ? r.mse_max : r.mse_count;
}

struct Transition {
  std::size_t next = 0;
  double prob = 0.0;
};

/// Explicit finite MDP with two actions (poll chain 0 or chain 1).
/// reward[s][a] is minus the expected query MSE after taking a in s.
struct ToyMdp {
  ToyModel model;
  ToyQuery query = ToyQuery::count;
  std::vector<ToyState> states;
  std::vector<std::array<std::vector<Transition>, 2>> transitions;
  std::vector<std::array<double, 2>> reward;

  [[nodiscard]] std::size_t size() const { return states.size(); }

  [[nodiscard]] std::size_t index(const ToyState& s) const {
    return ((static_cast<std::size_t>(s.age[0] - 1) * static_cast<std::size_t>(model.delta_max) +
             static_cast<std::size_t>(s.age[1] - 1)) *
                4 +
            static_cast<std::size_t>(s.obs[0] * 2 + s.obs[1]));
  }
};

/// Polling chain a observes it after this slot's transition, so the new
/// reading follows posterior(p_a, age_a + 1, o_a); the polled age resets to 1
/// and the other age grows by one, saturating at the cap.
inline ToyMdp build_mdp(const ToyModel& model, ToyQuery query) {
  model.validate();
  ToyMdp mdp;
  mdp.model = model;
  mdp.query = query;
  const int dm = model.delta_max;
  for (int d1 = 1; d1 <= dm; ++d1)
    for (int d2 = 1; d2 <= dm; ++d2)
      for (int o1 = 0; o1 < 2; ++o1)
        for (int o2 = 0; o2 < 2; ++o2) mdp.states.push_back({{d1, d2}, {o1, o2}});
  mdp.transitions.resize(mdp.size());
  mdp.reward.resize(mdp.size());
  for (std::size_t i = 0; i < mdp.size(); ++i) {
    const ToyState& s = mdp.states[i];
    for (int a = 0; a < 2; ++a) {
      const int other = 1 - a;
      const auto fresh = posterior(model.flip[a], s.age[a] + 1, s.obs[a]);
      double cost = 0.0;
      for (int o = 0; o < 2; ++o) {
        // Query instant: the polled chain was just read, the other aged one slot.
        ToyState answered = s;
        answered.age[a] = 0;
        answered.obs[a] = o;
        answered.age[other] = s.age[other] + 1;
        cost += fresh[o] * query_mse(model, answered, query);

        ToyState next = answered;
        next.age[a] = 1;
        next.age[other] = std::min(answered.age[other], dm);
        if (fresh[o] > 0.0) mdp.transitions[i][a].push_back({mdp.index(next), fresh[o]});
      }
      mdp.reward[i][a] = -cost;
    }
  }
  return mdp;
}

struct Solution {
  std::vector<int> policy;  // action per state, 0 or 1
  std::vector<double> values;
  std::vector<double> value_sums;  // sum of values after each evaluation round
  int rounds = 0;
};

inline double action_value(const ToyMdp& mdp, const std::vector<double>& v, std::size_t s, int a) {
  double q = mdp.reward[s][a];
  for (const auto& t : mdp.transitions[s][a]) q += mdp.model.gamma * t.prob * v[t.next];
  return q;
}

/// Iterative evaluation of a fixed policy to sup-norm change `tol`.
inline std::vector<double> evaluate_policy(const ToyMdp& mdp, const std::vector<int>& policy,
                                           std::vector<double> v, double tol = 1e-12,
                                           long max_iter = 1'000'000) {
  std::vector<double> next(mdp.size());
  for (long it = 0; it < max_iter; ++it) {
    double diff = 0.0;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
      next[s] = action_value(mdp, v, s, policy[s]);
      diff = std::max(diff, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (diff <= tol) return v;
  }
  throw NumericError("policy evaluation did not converge");
}

/// Howard policy iteration from the all-zeros policy. Improvement switches to
/// the second action only when it is better by more than `tie_tol`.
inline Solution policy_iteration(const ToyMdp& mdp, double tol = 1e-12, double tie_tol = 1e-10) {
  Solution sol;
  sol.policy.assign(mdp.size(), 0);
  sol.values.assign(mdp.size(), 0.0);
  for (int round = 0; round < 10'000; ++round) {
    sol.values = evaluate_policy(mdp, sol.policy, sol.values, tol);
    double sum = 0.0;
    for (double v : sol.values) sum += v;
    sol.value_sums.push_back(sum);
    bool changed = false;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
      const int best = action_value(mdp, sol.values, s, 1) > action_value(mdp, sol.values, s, 0) + tie_tol ? 1 : 0;
      if (best != sol.policy[s]) {
        sol.policy[s] = best;
        changed = true;
      }
    }
    sol.rounds = round + 1;
    if (!changed) return sol;
  }
  throw NumericError("policy iteration did not stabilize");
}

inline Solution value_iteration(const ToyMdp& mdp, double tol = 1e-12, long max_iter = 1'000'000) {
  Solution sol;
  sol.values.assign(mdp.size(), 0.0);
  std::vector<double> next(mdp.size());
  for (long it = 0; it < max_iter; ++it) {
    double diff = 0.0;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
      next[s] = std::max(action_value(mdp, sol.values, s, 0), action_value(mdp, sol.values, s, 1));
      diff = std::max(diff, std::abs(next[s] - sol.values[s]));
    }
    sol.values.swap(next);
    ++sol.rounds;
    if (diff <= tol) {
      sol.policy.resize(mdp.size());
      for (std::size_t s = 0; s < mdp.size(); ++s)
        sol.policy[s] = action_value(mdp, sol.values, s, 1) > action_value(mdp, sol.values, s, 0) ? 1 : 0;
      return sol;
    }
  }
  throw NumericError("value iteration did not converge");
}

// delta1,delta2,o1,o2,action,value with 1-based actions.
inline void write_policy_csv(std::ostream& os, const ToyMdp& mdp, const Solution& sol) {
  os << "delta1,delta2,o1,o2,action,value\n";
  os.precision(17);
  for (std::size_t i = 0; i < mdp.size(); ++i) {
    const auto& s = mdp.states[i];
    os << s.age[0] << ',' << s.age[1] << ',' << s.obs[0] << ',' << s.obs[1] << ',' << sol.policy[i] + 1 << ','
       << sol.values[i] << '\n';
  }
}

}  // namespace qaware::toy
