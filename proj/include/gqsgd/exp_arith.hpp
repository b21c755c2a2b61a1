#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gqsgd/levels.hpp"
#include "gqsgd/quantizer.hpp"
#include "gqsgd/rng.hpp"
#include "gqsgd/serialize.hpp"

namespace gqsgd {

// Signed power-of-two arithmetic for in-network aggregation of exponentially
// quantized gradients. A token (sign, e) stands for sign * 2^-e; e == 0 is
// the reserved zero encoding (canonical sign +1). Adding two tokens lands
// between two powers of two, so the sum is rounded stochastically back onto
// the grid using a shared geometric draw k with P(k > b) = 2^-b. That keeps
// every intermediate value a single token of fixed width, which is what lets
// reduction run inside an allreduce instead of requiring allgather.
struct ExpToken {
  std::int8_t sign = 1;  // +1 / -1
  std::uint32_t e = 0;   // binary exponent of the magnitude; 0 means zero

  bool is_zero() const { return e == 0; }
  bool operator==(const ExpToken&) const = default;
};

inline double token_value(const ExpToken& t) {
  if (t.e == 0) return 0.0;
  double v = 1.0;
  return t.sign * std::ldexp(v, -static_cast<int>(t.e));
}

std::uint32_t ceil_log2(std::uint64_t v);

// Sum magnitudes must stay below 1/2 so exponents can never collide with the
// zero encoding; dividing inputs by 2^prescale_shift(n) >= 2n guarantees it
// and is exact in exponent space.
std::uint32_t prescale_shift(std::uint32_t n);

// Whether aggregated lanes of width_bits bits can hold the worst case for n
// workers: the level-sum range for the standard grid, the shifted exponent
// range for the exponential grid. Exact integer arithmetic; width up to 32.
bool check_width(LevelKind kind, std::uint32_t s, std::uint32_t n,
                 std::uint32_t width_bits);

// Geometric draw from one uniform: k = m when u < 2^-m, else the (negated)
// binary exponent of u. Gives P(k > b) = 2^-b exactly for b < m, truncated
// at m = s + 1 so k always fits the token width.
std::uint32_t sample_k(double u, std::uint32_t m);

// Stochastic rounding of a positive value onto the powers of two bracketing
// it. Unbiased; used as the reference single-step rounding in tests.
double cnat_round(double y, double u);

struct ReduceContext {
  std::uint32_t s = 0;
  std::uint32_t n = 0;
  std::uint32_t width_bits = 0;
  std::uint32_t m = 0;          // truncation depth of the k draw, s + 1
  std::uint32_t shift = 0;      // prescale exponent offset
  std::uint32_t max_e = 0;      // largest exponent the lane can carry

  // Validates check_width for the exponential grid and the lane width;
  // throws std::invalid_argument when the configuration is refused.
  static ReduceContext make(std::uint32_t s, std::uint32_t n,
                            std::uint32_t width_bits);
};

// One aggregation step on a pair of tokens, consuming one shared draw k.
// Unbiased for the exact sum of the operand values whenever
// |e1 - e2| <= m - 1; zero operands pass the other operand through, and
// equal-and-opposite operands cancel exactly.
ExpToken reduce_pair(const ExpToken& a, const ExpToken& b, std::uint32_t k,
                     const ReduceContext& ctx);

// Element-wise acc = reduce(acc, in). The k draw for element j is keyed by
// (round, step, dst, elem_offset + j) so both transports and all replays
// agree bit for bit.
void reduce_tokens(std::span<ExpToken> acc, std::span<const ExpToken> in,
                   const ReduceContext& ctx, const CounterRng& rng,
                   std::uint64_t round, std::uint32_t step, std::uint32_t dst,
                   std::uint64_t elem_offset);

// Exponential-shard <-> token conversion. Level index i < s becomes
// e = i + shift (the prescale applied in exponent space); index s is zero.
std::vector<ExpToken> tokens_from_shard(const QuantizedShard& shard,
                                        const ReduceContext& ctx);

// Value represented by an aggregated token, undoing the prescale:
// norm * 2^shift * sign * 2^-e.
double token_contribution(const ExpToken& t, double norm,
                          const ReduceContext& ctx);

// Fixed-width lane packing: [sign bit][e in the low width-1 bits],
// little-endian lanes of width_bits / 8 bytes.
Payload pack_tokens(std::span<const ExpToken> tokens, std::uint32_t width_bits);
std::vector<ExpToken> unpack_tokens(std::span<const std::byte> bytes,
                                    std::uint32_t width_bits);

}  // namespace gqsgd
