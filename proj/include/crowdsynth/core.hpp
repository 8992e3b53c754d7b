#ifndef CROWDSYNTH_CORE_HPP_
#define CROWDSYNTH_CORE_HPP_

// Foundational types for finite-state, finite-horizon behaviors: state
// spaces, probability vectors, transition kernels, reward schedules, and
// the three primitives everything else is built on (KL divergence,
// expectation, and the linear program over the standard simplex).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace crowdsynth {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or horizon mismatch, NaN input, malformed argument.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Probability vector or scenario content fails validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// No contributor can be used (all scores infinite, or none admissible).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive oracle refused an instance above its hard size limit.
class GuardError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kProbabilityTolerance = 1e-9;

enum class NormalizationMode { kStrict, kRenormalize };

// ---------------------------------------------------------------------------
// StateSpace

using StateLabel = std::variant<std::int64_t, std::string>;

inline std::string to_string(const StateLabel& label) {
  if (const auto* i = std::get_if<std::int64_t>(&label)) return std::to_string(*i);
  return std::get<std::string>(label);
}

/// Ordered set of distinct labels; internal indices are 0-based positions.
class StateSpace {
 public:
  StateSpace() = default;

  explicit StateSpace(std::vector<StateLabel> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw ValidationError("state space must contain at least one state");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], i).second)
        throw ValidationError("duplicate state label '" + to_string(labels_[i]) + "'");
    }
  }

  /// Labels 1..d, the common case for graph-node scenarios.
  static StateSpace integers(std::size_t d, std::int64_t first = 1) {
    std::vector<StateLabel> labels;
    labels.reserve(d);
    for (std::size_t i = 0; i < d; ++i) labels.emplace_back(first + static_cast<std::int64_t>(i));
    return StateSpace(std::move(labels));
  }

  std::size_t size() const { return labels_.size(); }
  const StateLabel& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<StateLabel>& labels() const { return labels_; }

  std::optional<std::size_t> index_of(const StateLabel& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const StateSpace& a, const StateSpace& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<StateLabel> labels_;
  std::map<StateLabel, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// StatePmf

/// Non-negative probability vector summing to one within
/// kProbabilityTolerance. Immutable after construction.
class StatePmf {
 public:
  StatePmf() = default;

  explicit StatePmf(std::vector<double> probs, NormalizationMode mode = NormalizationMode::kStrict)
      : probs_(std::move(probs)) {
    if (probs_.empty()) throw ValidationError("probability vector is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      const double p = probs_[i];
      if (!std::isfinite(p)) throw ValidationError("entry " + std::to_string(i) + " is not finite");
      if (p < 0.0) throw ValidationError("entry " + std::to_string(i) + " is negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
      if (mode == NormalizationMode::kStrict || sum <= 0.0)
        throw ValidationError("entries sum to " + std::to_string(sum) + ", expected 1");
      for (double& p : probs_) p /= sum;
    }
  }

  static StatePmf point_mass(std::size_t d, std::size_t at) {
    std::vector<double> probs(d, 0.0);
    probs.at(at) = 1.0;
    return StatePmf(std::move(probs));
  }

  static StatePmf uniform(std::size_t d) { return StatePmf(std::vector<double>(d, 1.0 / static_cast<double>(d))); }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  const std::vector<double>& vector() const { return probs_; }

  friend bool operator==(const StatePmf&, const StatePmf&) = default;

 private:
  std::vector<double> probs_;
};

// ---------------------------------------------------------------------------
// TransitionKernel

/// Row-stochastic d x d matrix; row x is the pmf of the next state given x.
class TransitionKernel {
 public:
  TransitionKernel() = default;

  explicit TransitionKernel(std::vector<StatePmf> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw ValidationError("transition kernel has no rows");
    for (std::size_t x = 0; x < rows_.size(); ++x) {
      if (rows_[x].size() != rows_.size())
        throw ValidationError("row " + std::to_string(x) + " has " + std::to_string(rows_[x].size()) +
                              " entries, expected " + std::to_string(rows_.size()));
    }
  }

  /// Every row moves to `to` with probability one.
  static TransitionKernel constant(std::size_t d, std::size_t to) {
    return TransitionKernel(std::vector<StatePmf>(d, StatePmf::point_mass(d, to)));
  }

  std::size_t size() const { return rows_.size(); }
  const StatePmf& row(std::size_t from) const { return rows_.at(from); }
  const std::vector<StatePmf>& rows() const { return rows_; }
  double operator()(std::size_t from, std::size_t to) const { return rows_[from][to]; }

  friend bool operator==(const TransitionKernel&, const TransitionKernel&) = default;

 private:
  std::vector<StatePmf> rows_;
};

// ---------------------------------------------------------------------------
// Behavior

/// Markov chain over a finite horizon: the k = 0 marginal plus kernels for
/// k = 1..N, stored at kernels[k - 1].
struct Behavior {
  StatePmf initial;
  std::vector<TransitionKernel> kernels;

  std::size_t horizon() const { return kernels.size(); }
  std::size_t dim() const { return initial.size(); }
  const TransitionKernel& kernel(std::size_t k) const { return kernels.at(k - 1); }

  void check() const {
    if (kernels.empty()) throw StructuralError("behavior horizon must be at least 1");
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      if (kernels[k].size() != initial.size())
        throw StructuralError("kernel k=" + std::to_string(k + 1) + " has dimension " +
                              std::to_string(kernels[k].size()) + ", expected " + std::to_string(initial.size()));
    }
  }

  friend bool operator==(const Behavior&, const Behavior&) = default;
};

/// Agent behaviors have the same structure as the target.
using AgentPolicy = Behavior;

// ---------------------------------------------------------------------------
// RewardSchedule

/// r_k(x) for k = 1..N, stored at values[k - 1]; rewards are earned on arrival
/// in x_k.
struct RewardSchedule {
  std::vector<std::vector<double>> values;

  std::size_t horizon() const { return values.size(); }
  std::span<const double> at(std::size_t k) const { return values.at(k - 1); }

  static RewardSchedule zeros(std::size_t horizon, std::size_t d) {
    return RewardSchedule{std::vector<std::vector<double>>(horizon, std::vector<double>(d, 0.0))};
  }

  void check(std::size_t horizon, std::size_t d) const {
    if (values.size() != horizon)
      throw StructuralError("reward schedule has " + std::to_string(values.size()) + " steps, expected " +
                            std::to_string(horizon));
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (values[k].size() != d)
        throw StructuralError("reward step k=" + std::to_string(k + 1) + " has " + std::to_string(values[k].size()) +
                              " entries, expected " + std::to_string(d));
      for (std::size_t x = 0; x < d; ++x) {
        if (!std::isfinite(values[k][x]))
          throw StructuralError("reward k=" + std::to_string(k + 1) + " state " + std::to_string(x) +
                                " is not finite");
      }
    }
  }

  friend bool operator==(const RewardSchedule&, const RewardSchedule&) = default;
};

// ---------------------------------------------------------------------------
// WeightVector

/// Point of the standard simplex over contributors.
class WeightVector {
 public:
  WeightVector() = default;

  explicit WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw ValidationError("weight vector is empty");
    double sum = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw ValidationError("weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("weights must sum to 1");
  }

  static WeightVector vertex(std::size_t size, std::size_t at) {
    std::vector<double> w(size, 0.0);
    w.at(at) = 1.0;
    return WeightVector(std::move(w));
  }

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }

  /// Index of the unit entry when this is a simplex vertex.
  std::optional<std::size_t> vertex_index() const {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i] == 1.0) {
        if (found) return std::nullopt;
        found = i;
      } else if (weights_[i] != 0.0) {
        return std::nullopt;
      }
    }
    return found;
  }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Primitives

inline void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw StructuralError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
}

/// Σ p ln(p / q) with 0 ln(0 / q) = 0. Returns +inf when p is not absolutely
/// continuous with respect to q.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  check_same_size(p.size(), q.size(), "kl_divergence");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInfinity;
    sum += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can push the sum of a near-identical pair a few ulps below zero.
  return sum < 0.0 ? 0.0 : sum;
}

inline double kl_divergence(const StatePmf& p, const StatePmf& q) { return kl_divergence(p.probs(), q.probs()); }

inline double expected_value(std::span<const double> p, std::span<const double> f) {
  check_same_size(p.size(), f.size(), "expected_value");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0.0) sum += p[i] * f[i];
  }
  return sum;
}

inline double expected_value(const StatePmf& p, std::span<const double> f) { return expected_value(p.probs(), f); }

struct SimplexSolution {
  WeightVector weights;
  std::size_t index = 0;
  double value = 0.0;
};

/// Minimizes a^T alpha over the standard simplex. The minimum is attained at
/// the vertex of the smallest score; ties go to the lowest index.
inline SimplexSolution simplex_argmin(std::span<const double> scores) {
  if (scores.empty()) throw StructuralError("simplex_argmin: empty score vector");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double a = scores[i];
    if (std::isnan(a) || a == -kInfinity) throw StructuralError("simplex_argmin: score " + std::to_string(i) + " is not a finite value or +inf");
    if (a == kInfinity) continue;
    if (!best || a < scores[*best]) best = i;
  }
  if (!best) throw InfeasibleError("simplex_argmin: no feasible contributor (all scores are +inf)");
  return SimplexSolution{WeightVector::vertex(scores.size(), *best), *best, scores[*best]};
}

}  // namespace crowdsynth

#endif  // CROWDSYNTH_CORE_HPP_
