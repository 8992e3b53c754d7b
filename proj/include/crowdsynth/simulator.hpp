#ifndef CROWDSYNTH_SIMULATOR_HPP_
#define CROWDSYNTH_SIMULATOR_HPP_

// Sampling from agent policies: trajectory batches, the most likely route,
// and a Monte Carlo estimate of the exact cost.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/evaluation.hpp"
#include "crowdsynth/random.hpp"

namespace crowdsynth {

struct Trajectory {
  std::vector<std::size_t> states;  // x_0..x_N as state indices
  double log_prob_policy = 0.0;     // log of the transition factors only
  double log_prob_target = 0.0;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Samples are drawn in chunks of this size, each from its own stream
/// derived from the master seed, so chunks can be generated independently
/// and still concatenate to the same batch.
inline constexpr std::size_t kSampleChunk = 4096;

namespace detail {

inline void score_trajectory(Trajectory& t, const AgentPolicy& policy, const Behavior& target) {
  t.log_prob_policy = 0.0;
  t.log_prob_target = 0.0;
  for (std::size_t k = 1; k < t.states.size(); ++k) {
    t.log_prob_policy += std::log(policy.kernel(k)(t.states[k - 1], t.states[k]));
    t.log_prob_target += std::log(target.kernel(k)(t.states[k - 1], t.states[k]));
  }
}

inline std::string describe(const Trajectory& t) {
  std::string out;
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(t.states[k]);
  }
  return out;
}

}  // namespace detail

inline std::vector<Trajectory> sample_trajectories(const AgentPolicy& policy, const Behavior& target,
                                                   std::size_t count, std::uint64_t seed) {
  policy.check();
  target.check();
  check_same_size(policy.dim(), target.dim(), "sample_trajectories states");
  check_same_size(policy.horizon(), target.horizon(), "sample_trajectories horizon");
  if (count == 0) throw StructuralError("sample count must be at least 1");

  const std::size_t n = policy.horizon();
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::size_t chunk = 0; chunk * kSampleChunk < count; ++chunk) {
    Rng rng(seed, chunk);
    const std::size_t end = std::min(count, (chunk + 1) * kSampleChunk);
    for (std::size_t j = chunk * kSampleChunk; j < end; ++j) {
      Trajectory t;
      t.states.resize(n + 1);
      t.states[0] = rng.categorical(policy.initial.probs());
      for (std::size_t k = 1; k <= n; ++k) t.states[k] = rng.categorical(policy.kernel(k).row(t.states[k - 1]).probs());
      detail::score_trajectory(t, policy, target);
      out.push_back(std::move(t));
    }
  }
  return out;
}

/// Max-product dynamic program over the transition factors and the initial
/// pmf. Among exact ties the lexicographically smallest state sequence wins.
inline Trajectory most_likely_trajectory(const AgentPolicy& policy, const Behavior& target) {
  policy.check();
  check_same_size(policy.dim(), target.dim(), "most_likely_trajectory states");
  check_same_size(policy.horizon(), target.horizon(), "most_likely_trajectory horizon");
  const std::size_t n = policy.horizon();
  const std::size_t d = policy.dim();

  // best[k][x]: max log-probability of x_{k+1..N} given x_k = x.
  std::vector<std::vector<double>> best(n + 1, std::vector<double>(d, 0.0));
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t x = 0; x < d; ++x) {
      double m = -kInfinity;
      for (std::size_t y = 0; y < d; ++y) {
        const double p = policy.kernel(k + 1)(x, y);
        if (p > 0.0) m = std::max(m, std::log(p) + best[k + 1][y]);
      }
      best[k][x] = m;
    }
  }

  Trajectory t;
  t.states.resize(n + 1);
  double m = -kInfinity;
  for (std::size_t x = 0; x < d; ++x) {
    const double p = policy.initial[x];
    if (p > 0.0 && std::log(p) + best[0][x] > m) {
      m = std::log(p) + best[0][x];
      t.states[0] = x;
    }
  }
  for (std::size_t k = 1; k <= n; ++k) {
    double mk = -kInfinity;
    for (std::size_t y = 0; y < d; ++y) {
      const double p = policy.kernel(k)(t.states[k - 1], y);
      if (p > 0.0 && std::log(p) + best[k][y] > mk) {
        mk = std::log(p) + best[k][y];
        t.states[k] = y;
      }
    }
  }
  detail::score_trajectory(t, policy, target);
  return t;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

/// Sample mean of ln(pi(traj) / p(traj)) - sum_k r_k(x_k). The initial
/// factor is shared and cancels.
inline MonteCarloEstimate monte_carlo_cost(const AgentPolicy& policy, const Behavior& target,
                                           const RewardSchedule& rewards, std::size_t count, std::uint64_t seed) {
  check_compatible(policy, target, rewards);
  const auto batch = sample_trajectories(policy, target, count, seed);
  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t seen = 0;
  for (const auto& t : batch) {
    if (t.log_prob_target == -kInfinity)
      throw StructuralError("sampled trajectory " + detail::describe(t) +
                            " has zero probability under the target; cost estimator is undefined");
    double value = t.log_prob_policy - t.log_prob_target;
    for (std::size_t k = 1; k < t.states.size(); ++k) value -= rewards.at(k)[t.states[k]];
    ++seen;
    const double delta = value - mean;
    mean += delta / static_cast<double>(seen);
    m2 += delta * (value - mean);
  }
  MonteCarloEstimate out;
  out.mean = mean;
  out.count = seen;
  out.standard_error = seen > 1 ? std::sqrt(m2 / static_cast<double>(seen - 1) / static_cast<double>(seen)) : 0.0;
  return out;
}

}  // namespace crowdsynth

#endif  // CROWDSYNTH_SIMULATOR_HPP_
