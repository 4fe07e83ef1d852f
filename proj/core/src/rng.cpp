#include "advpc/rng.hpp"

#include <cmath>

#include "advpc/errors.hpp"

namespace advpc {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t master, std::uint64_t index) {
  return Rng(mix64(mix64(master) ^ mix64(index ^ 0xA24BAED4963EE407ull)));
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_range(double lo, double hi) {
  return lo + (hi - lo) * next_unit();
}

std::uint32_t Rng::next_below(std::uint32_t n) {
  if (n == 0) throw ContractError("Rng::next_below: n must be positive");
  // Multiply-shift map of a full 64-bit draw onto [0, n).
  return static_cast<std::uint32_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::next_normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  // Box-Muller; u1 is kept away from zero so the log stays finite.
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

}  // namespace advpc
