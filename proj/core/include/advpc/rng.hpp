#ifndef ADVPC_RNG_HPP
#define ADVPC_RNG_HPP

#include <cstdint>

namespace advpc {

// splitmix64 finalizer. Used both as the generator step and to key
// independent substreams from (master seed, index) pairs.
std::uint64_t mix64(std::uint64_t x);

// Small deterministic generator. The sequence depends only on the seed, not
// on the platform or standard library, so checkpoints, synthetic datasets
// and augmented attacks reproduce bit-for-bit everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Substream keyed by (master, index); examples evaluated in parallel each
  // get their own stream regardless of worker count.
  static Rng derive(std::uint64_t master, std::uint64_t index);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_unit();

  // Uniform in [lo, hi).
  double next_range(double lo, double hi);

  // Uniform integer in [0, n); n must be positive.
  std::uint32_t next_below(std::uint32_t n);

  // Standard normal via Box-Muller (second value cached).
  double next_normal();

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace advpc

#endif  // ADVPC_RNG_HPP
