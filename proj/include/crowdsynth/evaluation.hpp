#ifndef CROWDSYNTH_EVALUATION_HPP_
#define CROWDSYNTH_EVALUATION_HPP_

// Exact cost of an agent policy against a target and reward schedule,
//   KL(pi_{1:N} || p_{1:N}) - sum_k E[r_k(X_k)],
// plus brute-force oracles used to cross-check the synthesis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/synthesis.hpp"

namespace crowdsynth {

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

struct StepCost {
  double kl = 0.0;
  double reward = 0.0;
};

struct CostBreakdown {
  double total = 0.0;
  double kl_part = 0.0;
  double reward_part = 0.0;
  std::vector<StepCost> per_step;
};

inline void check_compatible(const AgentPolicy& policy, const Behavior& target, const RewardSchedule& rewards) {
  policy.check();
  target.check();
  check_same_size(policy.dim(), target.dim(), "policy vs target states");
  check_same_size(policy.horizon(), target.horizon(), "policy vs target horizon");
  rewards.check(target.horizon(), target.dim());
}

/// mu_0 = policy.initial, mu_k(x') = sum_x mu_{k-1}(x) pi_k(x'|x). Returns N + 1 vectors.
inline std::vector<std::vector<double>> propagate_marginals(const AgentPolicy& policy) {
  policy.check();
  const std::size_t d = policy.dim();
  std::vector<std::vector<double>> mu;
  mu.reserve(policy.horizon() + 1);
  mu.push_back(policy.initial.vector());
  for (std::size_t k = 1; k <= policy.horizon(); ++k) {
    std::vector<double> next(d, 0.0);
    const auto& prev = mu.back();
    for (std::size_t x = 0; x < d; ++x) {
      if (prev[x] == 0.0) continue;
      const auto& row = policy.kernel(k).row(x);
      for (std::size_t y = 0; y < d; ++y) next[y] += prev[x] * row[y];
    }
    mu.push_back(std::move(next));
  }
  return mu;
}

namespace detail {

inline CostBreakdown finish(std::vector<StepCost> steps) {
  CostBreakdown out;
  for (const auto& s : steps) {
    out.kl_part += s.kl;
    out.reward_part += s.reward;
  }
  out.per_step = std::move(steps);
  out.total = out.kl_part - out.reward_part;
  return out;
}

// Stage cost of one step under marginal `mu` of the conditioning state.
// Unreachable states contribute nothing, even with infinite KL.
inline StepCost stage_cost(std::span<const double> mu, const TransitionKernel& policy_kernel,
                           const TransitionKernel& target_kernel, std::span<const double> reward) {
  StepCost s;
  for (std::size_t x = 0; x < mu.size(); ++x) {
    if (mu[x] == 0.0) continue;
    const auto& row = policy_kernel.row(x);
    s.kl += mu[x] * kl_divergence(row, target_kernel.row(x));
    s.reward += mu[x] * expected_value(row, reward);
  }
  return s;
}

}  // namespace detail

/// Chain-rule evaluation: forward-propagates the policy marginals and sums
/// the expected per-step KL and reward.
inline CostBreakdown evaluate_cost(const AgentPolicy& policy, const Behavior& target, const RewardSchedule& rewards) {
  check_compatible(policy, target, rewards);
  const auto mu = propagate_marginals(policy);
  std::vector<StepCost> steps;
  steps.reserve(policy.horizon());
  for (std::size_t k = 1; k <= policy.horizon(); ++k)
    steps.push_back(detail::stage_cost(mu[k - 1], policy.kernel(k), target.kernel(k), rewards.at(k)));
  return detail::finish(std::move(steps));
}

inline std::uint64_t checked_power(std::uint64_t base, std::uint64_t exp, std::uint64_t limit) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (base != 0 && out > limit / base) return limit + 1;
    out *= base;
  }
  return out;
}

/// Independent oracle: sums over every trajectory x_0..x_N using the joint
/// pmfs directly. The initial factor is shared with the target, so only the
/// transition factors enter the log-ratio. Per-step entries hold the
/// trajectory-level reward at each k and the KL contribution of each
/// transition factor.
inline CostBreakdown trajectory_enumeration_cost(const AgentPolicy& policy, const Behavior& target,
                                                 const RewardSchedule& rewards) {
  check_compatible(policy, target, rewards);
  const std::size_t d = policy.dim();
  const std::size_t n = policy.horizon();
  if (checked_power(d, n, kEnumerationLimit) > kEnumerationLimit)
    throw GuardError("trajectory enumeration refused: d^N = " + std::to_string(d) + "^" + std::to_string(n) +
                     " exceeds " + std::to_string(kEnumerationLimit));

  std::vector<StepCost> steps(n);
  bool kl_infinite = false;
  std::vector<std::size_t> path(n + 1, 0);
  for (std::size_t x0 = 0; x0 < d; ++x0) {
    if (policy.initial[x0] == 0.0) continue;
    path[0] = x0;
    // Odometer over x_1..x_N.
    std::fill(path.begin() + 1, path.end(), 0);
    while (true) {
      double prob = policy.initial[x0];
      for (std::size_t k = 1; k <= n && prob != 0.0; ++k) prob *= policy.kernel(k)(path[k - 1], path[k]);
      if (prob != 0.0) {
        for (std::size_t k = 1; k <= n; ++k) {
          const double pk = policy.kernel(k)(path[k - 1], path[k]);
          const double qk = target.kernel(k)(path[k - 1], path[k]);
          if (qk == 0.0) {
            kl_infinite = true;
          } else {
            steps[k - 1].kl += prob * std::log(pk / qk);
          }
          steps[k - 1].reward += prob * rewards.at(k)[path[k]];
        }
      }
      std::size_t pos = n;
      while (pos >= 1 && ++path[pos] == d) path[pos--] = 0;
      if (pos == 0) break;
    }
  }
  auto out = detail::finish(std::move(steps));
  if (kl_infinite) {
    out.kl_part = kInfinity;
    out.total = kInfinity;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log-sum bound

struct LogSumCheck {
  double lhs = 0.0;  // KL(sum_i w_i c_i || target)
  double rhs = 0.0;  // sum_i w_i KL(c_i || target)
};

inline LogSumCheck logsum_bound_check(const WeightVector& weights, std::span<const StatePmf> components,
                                      const StatePmf& target_row) {
  check_same_size(weights.size(), components.size(), "logsum_bound_check");
  std::vector<double> mixture(target_row.size(), 0.0);
  LogSumCheck out;
  for (std::size_t i = 0; i < components.size(); ++i) {
    check_same_size(components[i].size(), target_row.size(), "logsum_bound_check component");
    if (weights[i] == 0.0) continue;
    for (std::size_t x = 0; x < mixture.size(); ++x) mixture[x] += weights[i] * components[i][x];
    out.rhs += weights[i] * kl_divergence(components[i], target_row);
  }
  out.lhs = kl_divergence(mixture, target_row.probs());
  return out;
}

// ---------------------------------------------------------------------------
// Policy assembly

/// choice[k - 1][x] = contributor used at step k from state x.
struct PureSchedule {
  std::vector<std::vector<std::size_t>> choice;

  friend bool operator==(const PureSchedule&, const PureSchedule&) = default;
};

inline AgentPolicy assemble_pure_policy(const Behavior& target, const ContributorSet& contributors,
                                        const PureSchedule& schedule) {
  check_contributors(target, contributors);
  check_same_size(schedule.choice.size(), target.horizon(), "schedule horizon");
  AgentPolicy policy{target.initial, {}};
  for (std::size_t k = 1; k <= target.horizon(); ++k) {
    const auto& sel = schedule.choice[k - 1];
    check_same_size(sel.size(), target.dim(), "schedule states");
    std::vector<StatePmf> rows;
    rows.reserve(target.dim());
    for (std::size_t x = 0; x < target.dim(); ++x) rows.push_back(contributors.at(sel[x]).kernel(k).row(x));
    policy.kernels.emplace_back(std::move(rows));
  }
  return policy;
}

/// Contributor i at every step.
inline AgentPolicy pure_contributor_policy(const Behavior& target, const Contributor& contributor) {
  return AgentPolicy{target.initial, contributor.kernels};
}

/// weights[k - 1][x] mixes contributor rows: pi_k(.|x) = sum_i w_i pi^i_k(.|x).
inline AgentPolicy assemble_mixture_policy(const Behavior& target, const ContributorSet& contributors,
                                           const std::vector<std::vector<WeightVector>>& weights) {
  check_contributors(target, contributors);
  check_same_size(weights.size(), target.horizon(), "mixture horizon");
  const std::size_t d = target.dim();
  AgentPolicy policy{target.initial, {}};
  for (std::size_t k = 1; k <= target.horizon(); ++k) {
    check_same_size(weights[k - 1].size(), d, "mixture states");
    std::vector<StatePmf> rows;
    rows.reserve(d);
    for (std::size_t x = 0; x < d; ++x) {
      const auto& w = weights[k - 1][x];
      check_same_size(w.size(), contributors.size(), "mixture weights");
      std::vector<double> row(d, 0.0);
      for (std::size_t i = 0; i < contributors.size(); ++i) {
        if (w[i] == 0.0) continue;
        const auto& src = contributors[i].kernel(k).row(x);
        for (std::size_t y = 0; y < d; ++y) row[y] += w[i] * src[y];
      }
      rows.emplace_back(std::move(row), NormalizationMode::kRenormalize);
    }
    policy.kernels.emplace_back(std::move(rows));
  }
  return policy;
}

// ---------------------------------------------------------------------------
// Pure-schedule oracle

enum class ScheduleMode { kPerTime, kPerTimeAndState };

struct OracleResult {
  PureSchedule schedule;
  CostBreakdown cost;
  std::string method;          // "enumeration" or "dynamic-programming"
  std::uint64_t evaluated = 0;  // schedules or candidate tails evaluated
};

namespace detail {

// Odometer over `digits` positions with `base` values each; calls f(digits)
// in lexicographic order.
template <typename F>
void for_each_assignment(std::size_t positions, std::size_t base, F&& f) {
  std::vector<std::size_t> digits(positions, 0);
  while (true) {
    f(digits);
    std::size_t pos = positions;
    while (pos > 0 && ++digits[pos - 1] == base) digits[--pos] = 0;
    if (pos == 0) return;
  }
}

// Exact cost of the tail k..N started from a point mass at x (time k - 1),
// using contributor `first` at step k and `schedule` afterwards.
inline double tail_cost(const Behavior& target, const ContributorSet& contributors, const RewardSchedule& rewards,
                        const PureSchedule& schedule, std::size_t k, std::size_t x, std::size_t first) {
  const std::size_t d = target.dim();
  std::vector<double> mu(d, 0.0);
  mu[x] = 1.0;
  double total = 0.0;
  for (std::size_t t = k; t <= target.horizon(); ++t) {
    std::vector<double> next(d, 0.0);
    for (std::size_t z = 0; z < d; ++z) {
      if (mu[z] == 0.0) continue;
      const std::size_t who = (t == k) ? first : schedule.choice[t - 1][z];
      const auto& row = contributors[who].kernel(t).row(z);
      total += mu[z] * (kl_divergence(row, target.kernel(t).row(z)) - expected_value(row, rewards.at(t)));
      for (std::size_t y = 0; y < d; ++y) next[y] += mu[z] * row[y];
    }
    mu = std::move(next);
  }
  return total;
}

}  // namespace detail

/// Best pure selection by exhaustive search. kPerTime picks one contributor
/// per step (S^N schedules); kPerTimeAndState picks one per (step, state),
/// enumerated when S^(N d) fits the limit and otherwise solved by exact
/// dynamic programming over tail costs. Ties resolve to the
/// lexicographically smallest schedule. `enumeration_limit` caps the number
/// of schedules enumerated; 0 forces the dynamic program in
/// kPerTimeAndState mode.
inline OracleResult pure_schedule_oracle(const Behavior& target, const ContributorSet& contributors,
                                         const RewardSchedule& rewards, ScheduleMode mode,
                                         std::uint64_t enumeration_limit = kEnumerationLimit) {
  check_contributors(target, contributors);
  rewards.check(target.horizon(), target.dim());
  const std::size_t n = target.horizon();
  const std::size_t d = target.dim();
  const std::size_t s = contributors.size();

  OracleResult best;
  best.cost.total = kInfinity;
  bool found = false;
  auto consider = [&](PureSchedule schedule) {
    auto cost = evaluate_cost(assemble_pure_policy(target, contributors, schedule), target, rewards);
    ++best.evaluated;
    if (!found || cost.total < best.cost.total) {
      best.schedule = std::move(schedule);
      best.cost = std::move(cost);
      found = true;
    }
  };

  if (mode == ScheduleMode::kPerTime) {
    if (checked_power(s, n, enumeration_limit) > enumeration_limit)
      throw GuardError("per-time oracle refused: S^N = " + std::to_string(s) + "^" + std::to_string(n) +
                       " exceeds " + std::to_string(enumeration_limit));
    best.method = "enumeration";
    detail::for_each_assignment(n, s, [&](const std::vector<std::size_t>& digits) {
      PureSchedule schedule;
      for (std::size_t k = 0; k < n; ++k) schedule.choice.emplace_back(d, digits[k]);
      consider(std::move(schedule));
    });
    return best;
  }

  if (checked_power(s, n * d, enumeration_limit) <= enumeration_limit) {
    best.method = "enumeration";
    detail::for_each_assignment(n * d, s, [&](const std::vector<std::size_t>& digits) {
      PureSchedule schedule;
      for (std::size_t k = 0; k < n; ++k)
        schedule.choice.emplace_back(digits.begin() + static_cast<std::ptrdiff_t>(k * d),
                                     digits.begin() + static_cast<std::ptrdiff_t>((k + 1) * d));
      consider(std::move(schedule));
    });
    return best;
  }

  // Selections at different (k, x) decouple: the best choice at (k, x) only
  // depends on the choices already fixed for later steps.
  best.method = "dynamic-programming";
  best.schedule.choice.assign(n, std::vector<std::size_t>(d, 0));
  for (std::size_t k = n; k >= 1; --k) {
    for (std::size_t x = 0; x < d; ++x) {
      double best_tail = kInfinity;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < s; ++i) {
        const double tail = detail::tail_cost(target, contributors, rewards, best.schedule, k, x, i);
        ++best.evaluated;
        if (tail < best_tail) {
          best_tail = tail;
          arg = i;
        }
      }
      best.schedule.choice[k - 1][x] = arg;
    }
  }
  best.cost = evaluate_cost(assemble_pure_policy(target, contributors, best.schedule), target, rewards);
  return best;
}

// ---------------------------------------------------------------------------
// Simplex grid oracle

struct GridOracleResult {
  std::vector<WeightVector> weights;  // best time-constant weights, [k - 1]
  CostBreakdown cost;
  std::uint64_t points = 0;
};

/// All weight vectors with entries in {0, 1/m, ..., 1} summing to one.
inline std::vector<WeightVector> simplex_grid(std::size_t s, std::size_t resolution) {
  std::vector<WeightVector> out;
  std::vector<std::size_t> counts(s, 0);
  // Compositions of `resolution` into s parts, lexicographically descending in
  // the first part so that vertex e_1 comes first.
  auto recurse = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
    if (pos + 1 == s) {
      counts[pos] = left;
      std::vector<double> w(s);
      for (std::size_t i = 0; i < s; ++i)
        w[i] = static_cast<double>(counts[i]) / static_cast<double>(resolution);
      out.emplace_back(std::move(w));
      return;
    }
    for (std::size_t c = left + 1; c-- > 0;) {
      counts[pos] = c;
      self(self, pos + 1, left - c);
    }
  };
  recurse(recurse, 0, resolution);
  return out;
}

/// Searches state-independent weights alpha_k over a simplex grid at every
/// step. Limited to S <= 3, N <= 3, d <= 4.
inline GridOracleResult simplex_grid_oracle(const Behavior& target, const ContributorSet& contributors,
                                            const RewardSchedule& rewards, std::size_t resolution) {
  check_contributors(target, contributors);
  rewards.check(target.horizon(), target.dim());
  const std::size_t n = target.horizon();
  const std::size_t d = target.dim();
  const std::size_t s = contributors.size();
  if (resolution == 0) throw StructuralError("grid resolution must be positive");
  if (s > 3 || n > 3 || d > 4)
    throw GuardError("grid oracle refused: requires S <= 3, N <= 3, d <= 4 (got S=" + std::to_string(s) +
                     ", N=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
  const auto grid = simplex_grid(s, resolution);
  if (checked_power(grid.size(), n, kEnumerationLimit) > kEnumerationLimit)
    throw GuardError("grid oracle refused: " + std::to_string(grid.size()) + "^" + std::to_string(n) +
                     " grid points exceed " + std::to_string(kEnumerationLimit));

  GridOracleResult best;
  bool found = false;
  detail::for_each_assignment(n, grid.size(), [&](const std::vector<std::size_t>& digits) {
    std::vector<std::vector<WeightVector>> w(n);
    for (std::size_t k = 0; k < n; ++k) w[k].assign(d, grid[digits[k]]);
    auto cost = evaluate_cost(assemble_mixture_policy(target, contributors, w), target, rewards);
    ++best.points;
    if (!found || cost.total < best.cost.total) {
      best.weights.clear();
      for (std::size_t k = 0; k < n; ++k) best.weights.push_back(grid[digits[k]]);
      best.cost = std::move(cost);
      found = true;
    }
  });
  return best;
}

}  // namespace crowdsynth

#endif  // CROWDSYNTH_EVALUATION_HPP_
