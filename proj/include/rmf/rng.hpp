#pragma once

#include <array>
#include <cstdint>

namespace rmf {

/// xoroshiro128++ generator with splitmix64 seeding.
///
/// All distributions are implemented here rather than through <random> so that a
/// seed produces the same stream on every platform and standard library. The full
/// state is 16 bytes and round-trips through checkpoints.
class Rng {
 public:
  using State = std::array<std::uint64_t, 2>;

  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream derived from (seed, stream); used for sharded sampling.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one uniform pair per draw, no cached spare.
  double normal();

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  State state() const { return s_; }
  void set_state(const State& s) { s_ = s; }

 private:
  State s_{};
};

}  // namespace rmf
