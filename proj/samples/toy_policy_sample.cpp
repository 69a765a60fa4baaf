// Prints the optimal polling policy of the two-chain example as an age grid
// for each observation pair.
#include <iostream>

#include "qaware/toy.hpp"

int main() {
  using namespace qaware::toy;
  const ToyModel model;  // p = (0.1, 0.2), age cap 20, discount 0.9
  for (auto query : {ToyQuery::count, ToyQuery::max}) {
    const ToyMdp mdp = build_mdp(model, query);
    const Solution sol = policy_iteration(mdp);
    std::cout << (query == ToyQuery::count ? "count" : "max") << " query, " << sol.rounds << " rounds\n";
    for (int o1 = 0; o1 < 2; ++o1) {
      for (int o2 = 0; o2 < 2; ++o2) {
        std::cout << "o = (" << o1 << ", " << o2 << "), rows delta1, columns delta2\n";
        for (int d1 = 1; d1 <= model.delta_max; ++d1) {
          for (int d2 = 1; d2 <= model.delta_max; ++d2)
            std::cout << sol.policy[mdp.index({{d1, d2}, {o1, o2}})] + 1;
          std::cout << '\n';
        }
      }
    }
  }
}
