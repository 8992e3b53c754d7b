#ifndef CROWDSYNTH_SYNTHESIS_HPP_
#define CROWDSYNTH_SYNTHESIS_HPP_

// Behavior synthesis from contributors: admissibility filtering, the
// backward recursion over scores a_k(x) and reward-to-go, and per-(k, state)
// contributor selection.

#include <cstddef>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"

namespace crowdsynth {

/// Contributors supply transition kernels for k = 1..N only; the agent's
/// initial pmf always comes from the target.
struct Contributor {
  std::string id;
  std::vector<TransitionKernel> kernels;

  const TransitionKernel& kernel(std::size_t k) const { return kernels.at(k - 1); }

  friend bool operator==(const Contributor&, const Contributor&) = default;
};

using ContributorSet = std::vector<Contributor>;

inline void check_contributors(const Behavior& target, const ContributorSet& contributors) {
  target.check();
  if (contributors.empty()) throw StructuralError("contributor set is empty");
  for (const auto& c : contributors) {
    if (c.kernels.size() != target.horizon())
      throw StructuralError("contributor '" + c.id + "' has horizon " + std::to_string(c.kernels.size()) +
                            ", expected " + std::to_string(target.horizon()));
    for (std::size_t k = 0; k < c.kernels.size(); ++k) {
      if (c.kernels[k].size() != target.dim())
        throw StructuralError("contributor '" + c.id + "' kernel k=" + std::to_string(k + 1) +
                              " has dimension " + std::to_string(c.kernels[k].size()) + ", expected " +
                              std::to_string(target.dim()));
    }
  }
}

// ---------------------------------------------------------------------------
// Admissibility

struct Exclusion {
  std::size_t index = 0;  // position in the input set
  std::string id;
  std::size_t step = 0;        // first violating k (1-based)
  std::size_t from_state = 0;  // conditioning state index at that k
};

struct FilterResult {
  ContributorSet admitted;
  std::vector<std::size_t> admitted_indices;
  std::vector<Exclusion> excluded;
};

/// Keeps contributors whose every row has finite KL divergence from the
/// matching target row. Throws InfeasibleError when nothing survives.
inline FilterResult filter_contributors(const Behavior& target, const ContributorSet& contributors) {
  check_contributors(target, contributors);
  FilterResult result;
  for (std::size_t i = 0; i < contributors.size(); ++i) {
    const auto& c = contributors[i];
    bool ok = true;
    for (std::size_t k = 1; k <= target.horizon() && ok; ++k) {
      for (std::size_t x = 0; x < target.dim(); ++x) {
        if (kl_divergence(c.kernel(k).row(x), target.kernel(k).row(x)) == kInfinity) {
          result.excluded.push_back(Exclusion{i, c.id, k, x});
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      result.admitted.push_back(c);
      result.admitted_indices.push_back(i);
    }
  }
  if (result.admitted.empty()) {
    std::string msg = "no admissible contributor:";
    for (const auto& e : result.excluded)
      msg += " '" + e.id + "' (k=" + std::to_string(e.step) + ", state " + std::to_string(e.from_state) + ")";
    throw InfeasibleError(msg);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthesis

/// Decision taken at one (k, previous state) pair.
struct StepDecision {
  std::size_t selected = 0;    // index into SynthesizedPolicy::contributor_ids
  WeightVector weights;        // vertex e_selected
  std::vector<double> scores;  // a_k(x), one entry per admitted contributor

  double value() const { return scores[selected]; }
};

struct SynthesizedPolicy {
  std::vector<std::string> contributor_ids;       // admitted contributors, in input order
  std::vector<std::size_t> contributor_indices;   // their positions in the input set
  std::vector<Exclusion> excluded;

  std::vector<std::vector<StepDecision>> decisions;  // [k - 1][x]
  std::vector<TransitionKernel> kernels;             // agent kernels, [k - 1]
  std::vector<std::vector<double>> reward_to_go_hat;  // r̂_k, [k - 1][x]
  std::vector<std::vector<double>> reward_to_go;      // r̄_k = r_k + r̂_k, [k - 1][x]

  std::size_t horizon() const { return kernels.size(); }
  const StepDecision& decision(std::size_t k, std::size_t x) const { return decisions.at(k - 1).at(x); }

  /// The agent behavior: synthesized kernels started from the target's
  /// initial pmf.
  AgentPolicy agent(const Behavior& target) const { return AgentPolicy{target.initial, kernels}; }

  friend bool operator==(const SynthesizedPolicy& a, const SynthesizedPolicy& b) {
    if (a.contributor_ids != b.contributor_ids || a.kernels != b.kernels || a.reward_to_go != b.reward_to_go ||
        a.reward_to_go_hat != b.reward_to_go_hat || a.decisions.size() != b.decisions.size())
      return false;
    for (std::size_t k = 0; k < a.decisions.size(); ++k) {
      if (a.decisions[k].size() != b.decisions[k].size()) return false;
      for (std::size_t x = 0; x < a.decisions[k].size(); ++x) {
        const auto& da = a.decisions[k][x];
        const auto& db = b.decisions[k][x];
        if (da.selected != db.selected || da.weights != db.weights || da.scores != db.scores) return false;
      }
    }
    return true;
  }
};

struct SynthesisOptions {
  bool filter = true;
};

/// Backward recursion from k = N to 1. At each (k, x) the score of
/// contributor i is
///   a_k^i(x) = KL(pi^i_k(.|x) || p_k(.|x)) - E_{pi^i_k(.|x)}[r_k + r̂_k],
/// the agent copies the row of the lowest-scoring contributor, and
/// r̂_{k-1}(x) = -min_i a_k^i(x) feeds the previous step.
inline SynthesizedPolicy synthesize(const Behavior& target, const ContributorSet& contributors,
                                    const RewardSchedule& rewards, const SynthesisOptions& options = {}) {
  check_contributors(target, contributors);
  rewards.check(target.horizon(), target.dim());

  SynthesizedPolicy policy;
  ContributorSet filtered;
  const ContributorSet* pool = &contributors;
  if (options.filter) {
    auto f = filter_contributors(target, contributors);
    filtered = std::move(f.admitted);
    policy.contributor_indices = std::move(f.admitted_indices);
    policy.excluded = std::move(f.excluded);
    pool = &filtered;
  } else {
    for (std::size_t i = 0; i < contributors.size(); ++i) policy.contributor_indices.push_back(i);
  }
  for (const auto& c : *pool) policy.contributor_ids.push_back(c.id);

  const std::size_t n = target.horizon();
  const std::size_t d = target.dim();
  const std::size_t s = pool->size();

  policy.decisions.resize(n);
  policy.reward_to_go_hat.assign(n, std::vector<double>(d, 0.0));
  policy.reward_to_go.assign(n, std::vector<double>(d, 0.0));
  std::vector<std::vector<StatePmf>> rows(n, std::vector<StatePmf>(d));

  std::vector<double> hat(d, 0.0);  // r̂_N = 0
  for (std::size_t k = n; k >= 1; --k) {
    auto& bar = policy.reward_to_go[k - 1];
    const auto r = rewards.at(k);
    for (std::size_t x = 0; x < d; ++x) bar[x] = r[x] + hat[x];
    policy.reward_to_go_hat[k - 1] = hat;

    auto& step = policy.decisions[k - 1];
    step.resize(d);
    std::vector<double> next_hat(d, 0.0);
    for (std::size_t x = 0; x < d; ++x) {
      const auto& target_row = target.kernel(k).row(x);
      std::vector<double> scores(s);
      for (std::size_t i = 0; i < s; ++i) {
        const auto& row = (*pool)[i].kernel(k).row(x);
        scores[i] = kl_divergence(row, target_row) - expected_value(row, bar);
      }
      SimplexSolution sol;
      try {
        sol = simplex_argmin(scores);
      } catch (const InfeasibleError&) {
        throw InfeasibleError("all contributor scores are +inf at k=" + std::to_string(k) + ", state " +
                              std::to_string(x));
      }
      if (options.filter && !std::isfinite(sol.value))
        throw Error("internal: non-finite score after filtering at k=" + std::to_string(k));
      rows[k - 1][x] = (*pool)[sol.index].kernel(k).row(x);
      next_hat[x] = -sol.value;
      step[x] = StepDecision{sol.index, std::move(sol.weights), std::move(scores)};
    }
    hat = std::move(next_hat);
  }

  policy.kernels.reserve(n);
  for (auto& r : rows) policy.kernels.emplace_back(std::move(r));
  return policy;
}

/// Upper bound on the cost of the synthesized agent, E_{x_0 ~ p_0}[a_1(x_0)^T alpha_1*].
/// The scores already carry the reward-to-go of later steps, so the bound
/// is the optimal cost-to-go at k = 1 averaged over the initial pmf. With
/// vertex weights the log-sum bound holds with equality and this equals the
/// exact cost of the agent.
inline double bound_value(const SynthesizedPolicy& policy, const Behavior& target) {
  target.check();
  check_same_size(policy.horizon(), target.horizon(), "bound_value horizon");
  double total = 0.0;
  for (std::size_t x = 0; x < target.dim(); ++x) {
    const double w = target.initial[x];
    if (w == 0.0) continue;
    const auto& dec = policy.decision(1, x);
    total += w * expected_value(dec.weights.weights(), dec.scores);
  }
  return total;
}

}  // namespace crowdsynth

#endif  // CROWDSYNTH_SYNTHESIS_HPP_
