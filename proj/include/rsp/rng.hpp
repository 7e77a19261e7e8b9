#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace rsp {

// Deterministic splittable PRNG (splitmix64 core). Every run seeds exactly one
// root generator; submodules obtain independent streams via fork(), so a trial
// replays bit-for-bit from its seed regardless of platform or standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection sampling.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  int next_bit() { return static_cast<int>(next_u64() >> 63); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller (one value per call; no cached state so
  // forked streams stay independent of call parity).
  double next_gaussian() {
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

  // Child stream derived from the current state and a label; advances this
  // generator once so successive forks with equal labels differ.
  Rng fork(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ next_u64();
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return Rng(h);
  }

  Rng fork(std::uint64_t index) {
    std::uint64_t h = next_u64();
    h ^= 0x9e3779b97f4a7c15ULL + index + (h << 6) + (h >> 2);
    return Rng(h);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rsp
