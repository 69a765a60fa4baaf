// Runs one episode of the periodic benchmark with MAF and the two greedy
// VoI schedulers and prints the per-query error of each.
#include <chrono>
#include <iostream>

#include "qaware/harness.hpp"

int main() {
  using namespace qaware;
  Scenario scenario = build_scenario("periodic");
  scenario.episodes = 1;

  MafPolicy maf;
  GreedyVoiPolicy greedy_cnt(count_range(-5.0, 0.0), scenario.model, scenario.voi);
  GreedyVoiPolicy greedy_max(MaxQuery{}, scenario.model, scenario.voi);

  for (const Policy* policy : {static_cast<const Policy*>(&maf), static_cast<const Policy*>(&greedy_cnt),
                               static_cast<const Policy*>(&greedy_max)}) {
    const auto start = std::chrono::steady_clock::now();
    const auto logs = run_episodes(scenario, *policy);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Metrics m = aggregate(logs, scenario.clients);
    std::cout << policy->name() << "  (" << secs << " s)\n";
    for (const auto& q : m.queries)
      std::cout << "  " << q.kind << ": mean MSE " << q.mse_mean << " over " << q.count << " queries\n";
    std::cout << "  overall cost " << m.overall_cost_mean << ", mean posterior trace " << m.state_mse_mean << "\n";
  }
}
