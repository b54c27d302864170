#include "rmf/rng.hpp"

#include <cmath>
#include <numbers>

namespace rmf {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  s_[0] = splitmix64(x);
  s_[1] = splitmix64(x);
  if (s_[0] == 0 && s_[1] == 0) s_[1] = 1;
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ 0xD1B54A32D192ED03ULL;
  std::uint64_t mixed = splitmix64(x) ^ (stream * 0x9E3779B97F4A7C15ULL);
  std::uint64_t y = stream + 0x632BE59BD9B4E019ULL;
  mixed ^= splitmix64(y);
  return Rng(mixed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t s0 = s_[0];
  std::uint64_t s1 = s_[1];
  const std::uint64_t result = rotl(s0 + s1, 17) + s0;
  s1 ^= s0;
  s_[0] = rotl(s0, 49) ^ s1 ^ (s1 << 21);
  s_[1] = rotl(s1, 28);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection on the top of the range keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

}  // namespace rmf
