#ifndef CROWDSYNTH_DEMO_HPP_
#define CROWDSYNTH_DEMO_HPP_

// Bundled route-planning scenario: an agent crosses a 6-node road graph from
// node 1 to node 6 in N = 4 steps, crowdsourcing its route from two other
// vehicles. The target prefers 1-2-4-5-6; contributor "red" drives 1-2-4-6
// and "blue" drives 1-3-5-6. The pmfs are a reconstruction on this graph,
// not measured data. scenarios/demo_graph.json holds the same scenario.

#include <array>
#include <cstddef>
#include <vector>

#include "crowdsynth/scenario.hpp"

namespace crowdsynth::demo {

inline constexpr std::size_t kNodes = 6;
inline constexpr std::size_t kHorizon = 4;

// Successor sets (1-based node ids, staying put included).
inline const std::array<std::vector<int>, kNodes>& successors() {
  static const std::array<std::vector<int>, kNodes> kSucc = {{
      {1, 2, 3},
      {2, 3, 4},
      {2, 3, 5},
      {4, 5, 6},
      {4, 5, 6},
      {6},
  }};
  return kSucc;
}

// Row from `node` putting `main` on `preferred` and `rest` on each other
// successor. Weights are given as exact decimals so the JSON copy of the
// scenario parses to identical doubles.
inline StatePmf route_row(int node, int preferred, double main, double rest) {
  const auto& succ = successors()[static_cast<std::size_t>(node - 1)];
  std::vector<double> row(kNodes, 0.0);
  if (succ.size() == 1) {
    row[static_cast<std::size_t>(succ[0] - 1)] = 1.0;
    return StatePmf(std::move(row));
  }
  for (int y : succ) row[static_cast<std::size_t>(y - 1)] = (y == preferred) ? main : rest;
  return StatePmf(std::move(row));
}

inline TransitionKernel route_kernel(const std::array<int, kNodes>& preferred, double main, double rest) {
  std::vector<StatePmf> rows;
  for (int node = 1; node <= static_cast<int>(kNodes); ++node)
    rows.push_back(route_row(node, preferred[static_cast<std::size_t>(node - 1)], main, rest));
  return TransitionKernel(std::move(rows));
}

inline constexpr double kTargetMain = 0.7;
inline constexpr double kTargetRest = 0.15;
inline constexpr double kContributorMain = 0.85;
inline constexpr double kContributorRest = 0.075;

inline Scenario scenario() {
  Scenario s;
  s.name = "demo-graph";
  s.states = StateSpace::integers(kNodes, 1);
  s.horizon = kHorizon;
  s.target.initial = StatePmf::point_mass(kNodes, 0);
  s.target.kernels.assign(kHorizon, route_kernel({2, 4, 5, 5, 6, 6}, kTargetMain, kTargetRest));
  s.contributors.push_back(Contributor{"red", std::vector(kHorizon, route_kernel({2, 4, 2, 6, 4, 6}, kContributorMain, kContributorRest))});
  s.contributors.push_back(Contributor{"blue", std::vector(kHorizon, route_kernel({3, 3, 5, 5, 6, 6}, kContributorMain, kContributorRest))});
  s.rewards.push_back(RewardProfile{"favor-node-2", {std::vector<std::vector<double>>(kHorizon, {0, 3, 0, 0, 0, 2})}});
  s.rewards.push_back(RewardProfile{"favor-node-3", {std::vector<std::vector<double>>(kHorizon, {0, 0, 3, 0, 0, 2})}});
  s.metadata = {
      {"description", "6-node road graph, N=4, start at node 1, two contributors"},
      {"provenance", "reconstruction: pmfs built on the graph adjacency, not measured data"},
      {"edges", "1-2 1-3 2-3 2-4 3-5 4-5 4-6 5-6, plus staying put"},
      {"target_route", "1-2-4-5-6"},
      {"contributor_routes", "red: 1-2-4-6, blue: 1-3-5-6"},
  };
  return s;
}

}  // namespace crowdsynth::demo

#endif  // CROWDSYNTH_DEMO_HPP_
