#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace alecton {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. All randomness in the project flows through
// this wrapper so that draws are identical across platforms and thread
// counts: the standard mt19937_64 engine is fully specified, and uniform /
// gaussian variates are generated from raw 64-bit words rather than
// std::*_distribution (whose output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Independent substream i of a master seed; used to give every trial of an
  // experiment its own stream so results do not depend on scheduling.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream + 0x51'7c'c1'b7'27'22'0a95ULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

  // Uniform on (0, 1], for logs.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
  }

  // Standard normal via Box-Muller; second variate cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    double t = 2.0 * M_PI * uniform();
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
  }

  // Uniform index in {0, ..., n-1} by rejection (unbiased).
  std::size_t index(std::size_t n) {
    std::uint64_t bound = n;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace alecton
