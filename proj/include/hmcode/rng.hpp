#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "hmcode/errors.hpp"

namespace hmcode {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Seeded randomness handle. All sampling goes through the helpers below so
// that results depend only on the seed, not on library internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derived stream: mixes (seed, a, b) into an independent engine seed.
  // Used to split matrix/source/channel randomness deterministically.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = seed;
    std::uint64_t h = detail::splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    h ^= detail::splitmix64(s);
    s ^= b * 0xc2b2ae3d27d4eb4fULL;
    h ^= detail::splitmix64(s);
    return Rng(h);
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open01() { return 1.0 - uniform01(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw ParameterError("uniform_int: n must be positive");
    int v = static_cast<int>(uniform01() * n);
    return v < n ? v : n - 1;
  }

  // Inverse-CDF draw from a discrete distribution (weights sum to ~1).
  int sample_discrete(std::span<const double> weights) {
    const double u = uniform01();
    double cum = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = static_cast<int>(i);
      cum += weights[i];
      if (u < cum) return static_cast<int>(i);
    }
    if (last_positive < 0) throw ParameterError("sample_discrete: all-zero weights");
    return last_positive;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace hmcode
