#ifndef CROWDSYNTH_RANDOM_HPP_
#define CROWDSYNTH_RANDOM_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace crowdsynth {

/// MT19937-64 seeded through std::seed_seq. Both algorithms are fixed by the
/// C++ standard, and doubles are built from raw 64-bit draws here rather
/// than through <random> distributions, so a seed yields the same stream on
/// every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index drawn from an unnormalized non-negative weight vector by
  /// inverse-CDF search. Falls back to the last positive entry when rounding
  /// leaves the draw above the cumulative sum.
  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crowdsynth

#endif  // CROWDSYNTH_RANDOM_HPP_
