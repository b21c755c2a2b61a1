#pragma once

#include <cmath>
#include <cstdint>

namespace gqsgd {

// Counter-based randomness. Every draw is a pure function of a 64-bit seed
// plus a small tuple of integer keys, so any participant that knows the keys
// reproduces the same value. This is what keeps the in-process simulator and
// the socket transport bit-identical: randomness never depends on execution
// order, only on (seed, purpose, round, rank, element).
//
// The mixer is the splitmix64 finalizer applied to a running state; it passes
// the statistical needs here (uniform dither draws, geometric tail sampling)
// by a wide margin and costs a handful of arithmetic ops per draw.

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Purpose tags keep independent uses of the same (round, rank, element)
// coordinates from colliding.
enum class RngStream : std::uint64_t {
  Dither = 1,     // stochastic rounding inside quantize
  ReduceDraw = 2, // k draws inside tree/ring token reduction
  TaskGen = 3,    // synthetic task generation
  Batch = 4,      // minibatch index sampling
  ShardGen = 5,   // test input generation
};

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(RngStream stream, std::uint64_t a, std::uint64_t b,
                     std::uint64_t c) const {
    std::uint64_t h = detail::mix64(seed_ ^ 0x517cc1b727220a95ull);
    h = detail::mix64(h ^ static_cast<std::uint64_t>(stream));
    h = detail::mix64(h ^ a);
    h = detail::mix64(h ^ b);
    h = detail::mix64(h ^ c);
    return h;
  }

  // Uniform in [0, 1): 53 random bits over 2^53, so 0 is reachable and 1 is
  // not. Stochastic rounding and inverse-CDF sampling both want this
  // half-open convention.
  double u01(RngStream stream, std::uint64_t a, std::uint64_t b,
             std::uint64_t c) const {
    return static_cast<double>(bits(stream, a, b, c) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two decorrelated draws. Used only for
  // synthetic data generation, never in the communication path.
  double normal(RngStream stream, std::uint64_t a, std::uint64_t b,
                std::uint64_t c) const;

 private:
  std::uint64_t seed_;
};

inline double CounterRng::normal(RngStream stream, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) const {
  const double u1 = u01(stream, a, b, c ^ 0x8000000000000000ull);
  const double u2 = u01(stream, a, b, c ^ 0x4000000000000000ull);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace gqsgd
