#include "gqsgd/exp_arith.hpp"

#include <cmath>
#include <stdexcept>

namespace gqsgd {

std::uint32_t ceil_log2(std::uint64_t v) {
  if (v == 0) throw std::invalid_argument("ceil_log2(0)");
  std::uint32_t bits = 0;
  std::uint64_t p = 1;
  while (p < v) {
    p <<= 1;
    ++bits;
  }
  return bits;
}

std::uint32_t prescale_shift(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("worker count must be >= 1");
  return ceil_log2(2ull * n);
}

bool check_width(LevelKind kind, std::uint32_t s, std::uint32_t n,
                 std::uint32_t width_bits) {
  if (s == 0 || n == 0 || width_bits < 2 || width_bits > 32) return false;
  const std::uint64_t capacity = 1ull << (width_bits - 1);
  switch (kind) {
    case LevelKind::Standard:
      // Signed lane must hold n times the largest level value; the formula
      // is 1 + log2(s + 1) + log2(n) <= width.
      return static_cast<std::uint64_t>(n) * (s + 1ull) <= capacity;
    case LevelKind::Exponential:
      // Exponent field must span the level range plus the prescale drift:
      // 1 + log2(s + 1 + log2(n)) <= width.
      return s + 1ull + ceil_log2(n) <= capacity;
    case LevelKind::Custom:
      return false;
  }
  return false;
}

std::uint32_t sample_k(double u, std::uint32_t m) {
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("u outside [0, 1)");
  if (m == 0) throw std::invalid_argument("truncation depth must be >= 1");
  if (u < std::ldexp(1.0, -static_cast<int>(m))) return m;
  const int b = std::ilogb(u);  // u in [2^b, 2^(b+1)), b <= -1
  const std::uint32_t k = static_cast<std::uint32_t>(-b);
  return k > m ? m : k;
}

double cnat_round(double y, double u) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    throw std::invalid_argument("value must be positive and finite");
  }
  const int b = std::ilogb(y);
  const double lo = std::ldexp(1.0, b);
  if (y == lo) return y;
  const double p_up = y / lo - 1.0;  // (y - lo) / lo, exact in [0, 1)
  return u < p_up ? std::ldexp(1.0, b + 1) : lo;
}

ReduceContext ReduceContext::make(std::uint32_t s, std::uint32_t n,
                                  std::uint32_t width_bits) {
  if (width_bits != 8 && width_bits != 16 && width_bits != 32) {
    throw std::invalid_argument("token lane width must be 8, 16, or 32 bits");
  }
  if (!check_width(LevelKind::Exponential, s, n, width_bits)) {
    throw std::invalid_argument(
        "refused configuration: exponent range does not fit the lane width");
  }
  ReduceContext ctx;
  ctx.s = s;
  ctx.n = n;
  ctx.width_bits = width_bits;
  ctx.m = s + 1;
  ctx.shift = prescale_shift(n);
  ctx.max_e = (1u << (width_bits - 1)) - 1;
  return ctx;
}

ExpToken reduce_pair(const ExpToken& a, const ExpToken& b, std::uint32_t k,
                     const ReduceContext& ctx) {
  if (a.e > ctx.max_e || b.e > ctx.max_e) {
    throw std::overflow_error("token exponent outside the lane range");
  }
  if (a.is_zero() && b.is_zero()) return ExpToken{};
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;

  const int sign12 = a.sign * b.sign;
  const std::int64_t gap =
      std::int64_t{a.e} > std::int64_t{b.e} ? std::int64_t{a.e} - b.e
                                            : std::int64_t{b.e} - a.e;
  const std::int64_t diff = gap - (sign12 < 0 ? 1 : 0);
  if (diff < 0) return ExpToken{};  // equal magnitudes, opposite signs

  const std::int8_t sign_out = (a.e <= b.e) ? a.sign : b.sign;
  const std::uint32_t e_min = a.e <= b.e ? a.e : b.e;
  const bool bump = std::int64_t{k} > diff;
  const std::int64_t e_out =
      std::int64_t{e_min} - (sign12 > 0 ? (bump ? 1 : 0) : -(bump ? 1 : 0));
  if (e_out < 1 || e_out > std::int64_t{ctx.max_e}) {
    // Unreachable when inputs respect the prescale contract; a hit means the
    // operands were not produced by this pipeline.
    throw std::overflow_error("aggregated exponent left the representable range");
  }
  return ExpToken{sign_out, static_cast<std::uint32_t>(e_out)};
}

void reduce_tokens(std::span<ExpToken> acc, std::span<const ExpToken> in,
                   const ReduceContext& ctx, const CounterRng& rng,
                   std::uint64_t round, std::uint32_t step, std::uint32_t dst,
                   std::uint64_t elem_offset) {
  if (acc.size() != in.size()) {
    throw std::invalid_argument("token spans disagree in length");
  }
  const std::uint64_t step_dst = (std::uint64_t{step} << 32) | dst;
  for (std::size_t j = 0; j < acc.size(); ++j) {
    const double u = rng.u01(RngStream::ReduceDraw, round, step_dst, elem_offset + j);
    const std::uint32_t k = sample_k(u, ctx.m);
    acc[j] = reduce_pair(acc[j], in[j], k, ctx);
  }
}

std::vector<ExpToken> tokens_from_shard(const QuantizedShard& shard,
                                        const ReduceContext& ctx) {
  std::vector<ExpToken> tokens(shard.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const std::uint32_t idx = shard.level_idx[j];
    if (idx > ctx.s) throw std::invalid_argument("level index exceeds s");
    if (idx == ctx.s) continue;  // zero token
    tokens[j] = ExpToken{shard.sign[j], idx + ctx.shift};
  }
  return tokens;
}

double token_contribution(const ExpToken& t, double norm,
                          const ReduceContext& ctx) {
  return norm * std::ldexp(token_value(t), static_cast<int>(ctx.shift));
}

Payload pack_tokens(std::span<const ExpToken> tokens, std::uint32_t width_bits) {
  if (width_bits != 8 && width_bits != 16 && width_bits != 32) {
    throw std::invalid_argument("token lane width must be 8, 16, or 32 bits");
  }
  const std::uint32_t lane_bytes = width_bits / 8;
  const std::uint32_t sign_bit = 1u << (width_bits - 1);
  Payload out;
  out.reserve(tokens.size() * lane_bytes);
  for (const ExpToken& t : tokens) {
    if (t.e >= sign_bit) throw std::overflow_error("token exponent outside the lane range");
    std::uint32_t lane = t.e;
    if (t.sign < 0 && t.e != 0) lane |= sign_bit;
    for (std::uint32_t i = 0; i < lane_bytes; ++i) {
      out.push_back(static_cast<std::byte>((lane >> (8 * i)) & 0xff));
    }
  }
  return out;
}

std::vector<ExpToken> unpack_tokens(std::span<const std::byte> bytes,
                                    std::uint32_t width_bits) {
  if (width_bits != 8 && width_bits != 16 && width_bits != 32) {
    throw std::invalid_argument("token lane width must be 8, 16, or 32 bits");
  }
  const std::uint32_t lane_bytes = width_bits / 8;
  const std::uint32_t sign_bit = 1u << (width_bits - 1);
  if (bytes.size() % lane_bytes != 0) {
    throw std::domain_error("token payload length is not a whole number of lanes");
  }
  std::vector<ExpToken> tokens(bytes.size() / lane_bytes);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    std::uint32_t lane = 0;
    for (std::uint32_t i = 0; i < lane_bytes; ++i) {
      lane |= static_cast<std::uint32_t>(bytes[j * lane_bytes + i]) << (8 * i);
    }
    const bool negative = (lane & sign_bit) != 0;
    const std::uint32_t e = lane & (sign_bit - 1);
    if (e == 0 && negative) throw std::domain_error("negative zero token on the wire");
    tokens[j] = ExpToken{negative ? std::int8_t{-1} : std::int8_t{1}, e};
  }
  return tokens;
}

}  // namespace gqsgd
