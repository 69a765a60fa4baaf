#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qaware/dynamics.hpp"
#include "qaware/kalman.hpp"
#include "qaware/queries.hpp"
#include "qaware/random.hpp"

namespace qaware {

// What a scheduler may see of a client: its query, weight and tau.
struct ClientView {
  QueryKind kind;
  double alpha = 1.0;
  std::int64_t tau = 0;
  double tau_scale = 1.0;
};

/// Everything a scheduler sees at decision time: the a priori belief, the
/// per-sensor age of information and the client snapshots.
struct SchedulerContext {
  const BeliefState& belief_prior;
  std::span<const std::int64_t> aoi;
  std::span<const ClientView> clients;
  std::int64_t slot = 0;
};

/// Scheduler interface. decide() must be safe to call concurrently from
/// several episodes; all randomness comes through the rng argument.
class Policy {
 public:
  virtual ~Policy() = default;
  [[nodiscard]] virtual std::size_t decide(const SchedulerContext& context, Rng& rng) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

// Index of the largest age; ties go to the lowest index.
inline std::size_t maf_decide(const SchedulerContext& context) {
  std::size_t best = 0;
  for (std::size_t n = 1; n < context.aoi.size(); ++n)
    if (context.aoi[n] > context.aoi[best]) best = n;
  return best;
}

class MafPolicy final : public Policy {
 public:
  [[nodiscard]] std::size_t decide(const SchedulerContext& context, Rng&) const override {
    return maf_decide(context);
  }
  [[nodiscard]] std::string name() const override { return "maf"; }
};

/// VoI of every sensor for one query kind. Each sensor is evaluated with the
/// same random numbers so the comparison between sensors is not swamped by
/// Monte Carlo noise.
inline std::vector<double> voi_per_sensor(const QueryKind& target, const BeliefState& prior,
                                          const SystemModel& model, const VoiSettings& settings, Rng& rng) {
  const std::uint64_t seed = rng();
  std::vector<double> theta(static_cast<std::size_t>(model.sensor_count()));
  for (std::size_t n = 0; n < theta.size(); ++n) {
    Rng shared{seed};
    theta[n] = voi(target, prior, model, n, settings, shared);
  }
  return theta;
}

// One-step optimal choice for a single target query: argmax of VoI.
inline std::size_t greedy_voi_decide(const SchedulerContext& context, const QueryKind& target,
                                     const SystemModel& model, const VoiSettings& settings, Rng& rng) {
  const auto theta = voi_per_sensor(target, context.belief_prior, model, settings, rng);
  std::size_t best = 0;
  for (std::size_t n = 1; n < theta.size(); ++n)
    if (theta[n] > theta[best] + 1e-12) best = n;
  return best;
}

class GreedyVoiPolicy final : public Policy {
 public:
  GreedyVoiPolicy(QueryKind target, const SystemModel& model, VoiSettings settings = {})
      : target_(target), model_(model), settings_(settings) {}

  [[nodiscard]] std::size_t decide(const SchedulerContext& context, Rng& rng) const override {
    return greedy_voi_decide(context, target_, model_, settings_, rng);
  }
  [[nodiscard]] std::string name() const override { return "greedy-" + query_tag(target_); }
  [[nodiscard]] const QueryKind& target() const { return target_; }

 private:
  QueryKind target_;
  SystemModel model_;
  VoiSettings settings_;
};

}  // namespace qaware
