#include "gqsgd/collectives.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace gqsgd {

void TrafficReport::merge(const TrafficReport& other) {
  if (other.bytes_sent.size() > bytes_sent.size()) {
    bytes_sent.resize(other.bytes_sent.size(), 0);
  }
  for (std::size_t i = 0; i < other.bytes_sent.size(); ++i) {
    bytes_sent[i] += other.bytes_sent[i];
  }
  total_bytes += other.total_bytes;
  messages += other.messages;
  steps += other.steps;
  reduce_invocations += other.reduce_invocations;
}

IntSumOps::IntSumOps(std::uint32_t width_bits) : width_bits_(width_bits) {
  if (width_bits != 8 && width_bits != 16 && width_bits != 32 && width_bits != 64) {
    throw std::invalid_argument("integer lane width must be 8, 16, 32, or 64 bits");
  }
}

namespace {

std::int64_t load_int(std::span<const std::byte> bytes, std::size_t lane,
                      std::uint32_t lane_bytes) {
  std::uint64_t v = 0;
  for (std::uint32_t i = 0; i < lane_bytes; ++i) {
    v |= static_cast<std::uint64_t>(bytes[lane * lane_bytes + i]) << (8 * i);
  }
  // Sign-extend from lane width.
  const std::uint32_t bits = lane_bytes * 8;
  if (bits < 64 && (v >> (bits - 1)) & 1) v |= ~0ull << bits;
  return static_cast<std::int64_t>(v);
}

void store_int(std::span<std::byte> bytes, std::size_t lane,
               std::uint32_t lane_bytes, std::int64_t value) {
  const auto v = static_cast<std::uint64_t>(value);
  for (std::uint32_t i = 0; i < lane_bytes; ++i) {
    bytes[lane * lane_bytes + i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
  }
}

void check_pair(std::span<std::byte> acc, std::span<const std::byte> in,
                std::size_t lane_bytes) {
  if (acc.size() != in.size() || acc.size() % lane_bytes != 0) {
    throw std::invalid_argument("payload chunks disagree or are not lane-aligned");
  }
}

}  // namespace

void IntSumOps::combine(std::span<std::byte> acc, std::span<const std::byte> in,
                        std::uint64_t, std::uint32_t, std::uint32_t,
                        std::uint64_t) const {
  const std::uint32_t lb = width_bits_ / 8;
  check_pair(acc, in, lb);
  const std::int64_t hi = width_bits_ == 64
                              ? std::numeric_limits<std::int64_t>::max()
                              : (std::int64_t{1} << (width_bits_ - 1)) - 1;
  const std::int64_t lo = width_bits_ == 64
                              ? std::numeric_limits<std::int64_t>::min()
                              : -(std::int64_t{1} << (width_bits_ - 1));
  const std::size_t lanes = acc.size() / lb;
  for (std::size_t j = 0; j < lanes; ++j) {
    const std::int64_t a = load_int(acc, j, lb);
    const std::int64_t b = load_int(in, j, lb);
    std::int64_t sum;
    if (__builtin_add_overflow(a, b, &sum) || sum > hi || sum < lo) {
      throw std::overflow_error("integer lane overflow during aggregation");
    }
    store_int(acc, j, lb, sum);
  }
}

void F32SumOps::combine(std::span<std::byte> acc, std::span<const std::byte> in,
                        std::uint64_t, std::uint32_t, std::uint32_t,
                        std::uint64_t) const {
  check_pair(acc, in, 4);
  const std::size_t lanes = acc.size() / 4;
  for (std::size_t j = 0; j < lanes; ++j) {
    float a, b;
    std::memcpy(&a, acc.data() + 4 * j, 4);
    std::memcpy(&b, in.data() + 4 * j, 4);
    a += b;
    std::memcpy(acc.data() + 4 * j, &a, 4);
  }
}

void F64SumOps::combine(std::span<std::byte> acc, std::span<const std::byte> in,
                        std::uint64_t, std::uint32_t, std::uint32_t,
                        std::uint64_t) const {
  check_pair(acc, in, 8);
  const std::size_t lanes = acc.size() / 8;
  for (std::size_t j = 0; j < lanes; ++j) {
    double a, b;
    std::memcpy(&a, acc.data() + 8 * j, 8);
    std::memcpy(&b, in.data() + 8 * j, 8);
    a += b;
    std::memcpy(acc.data() + 8 * j, &a, 8);
  }
}

void F64MaxOps::combine(std::span<std::byte> acc, std::span<const std::byte> in,
                        std::uint64_t, std::uint32_t, std::uint32_t,
                        std::uint64_t) const {
  check_pair(acc, in, 8);
  const std::size_t lanes = acc.size() / 8;
  for (std::size_t j = 0; j < lanes; ++j) {
    double a, b;
    std::memcpy(&a, acc.data() + 8 * j, 8);
    std::memcpy(&b, in.data() + 8 * j, 8);
    a = std::max(a, b);
    std::memcpy(acc.data() + 8 * j, &a, 8);
  }
}

void TokenReduceOps::combine(std::span<std::byte> acc,
                             std::span<const std::byte> in, std::uint64_t round,
                             std::uint32_t step, std::uint32_t dst,
                             std::uint64_t elem_offset) const {
  const std::uint32_t lb = ctx_.width_bits / 8;
  check_pair(acc, in, lb);
  const std::uint32_t sign_bit = 1u << (ctx_.width_bits - 1);
  const std::uint64_t step_dst = (std::uint64_t{step} << 32) | dst;
  const std::size_t lanes = acc.size() / lb;
  for (std::size_t j = 0; j < lanes; ++j) {
    std::uint32_t la = 0, lin = 0;
    for (std::uint32_t i = 0; i < lb; ++i) {
      la |= static_cast<std::uint32_t>(acc[j * lb + i]) << (8 * i);
      lin |= static_cast<std::uint32_t>(in[j * lb + i]) << (8 * i);
    }
    const ExpToken a{(la & sign_bit) ? std::int8_t{-1} : std::int8_t{1},
                     la & (sign_bit - 1)};
    const ExpToken b{(lin & sign_bit) ? std::int8_t{-1} : std::int8_t{1},
                     lin & (sign_bit - 1)};
    const double u =
        rng_.u01(RngStream::ReduceDraw, round, step_dst, elem_offset + j);
    const ExpToken out = reduce_pair(a, b, sample_k(u, ctx_.m), ctx_);
    std::uint32_t lane = out.e;
    if (out.sign < 0 && out.e != 0) lane |= sign_bit;
    for (std::uint32_t i = 0; i < lb; ++i) {
      acc[j * lb + i] = static_cast<std::byte>((lane >> (8 * i)) & 0xff);
    }
  }
}

AllreduceResult allreduce_inproc(std::vector<Payload> payloads,
                                 const Schedule& sched, const PayloadOps& ops,
                                 std::uint64_t round) {
  const std::uint32_t n = sched.workers;
  if (payloads.size() != n) {
    throw std::invalid_argument("payload count does not match the schedule");
  }
  const std::size_t lb = ops.lane_bytes();
  const std::size_t bytes = payloads.empty() ? 0 : payloads.front().size();
  for (const auto& p : payloads) {
    if (p.size() != bytes || bytes % lb != 0) {
      throw std::invalid_argument("payloads must share a lane-aligned size");
    }
  }
  const std::size_t lanes = bytes / lb;

  AllreduceResult res;
  res.traffic.bytes_sent.assign(n, 0);
  res.traffic.steps = sched.steps;
  for (const CommEvent& ev : sched.events) {
    const auto [lane_begin, lane_end] = chunk_lane_range(lanes, sched.chunks, ev.chunk);
    const std::size_t off = lane_begin * lb;
    const std::size_t len = (lane_end - lane_begin) * lb;
    std::span<std::byte> dst_span{payloads[ev.dst].data() + off, len};
    std::span<const std::byte> src_span{payloads[ev.src].data() + off, len};
    if (ev.op == CommOp::Reduce) {
      ops.combine(dst_span, src_span, round, ev.step, ev.dst, lane_begin);
      ++res.traffic.reduce_invocations;
    } else {
      std::copy(src_span.begin(), src_span.end(), dst_span.begin());
    }
    res.traffic.add_send(ev.src, len);
  }
  res.per_worker = std::move(payloads);
  return res;
}

AllgatherResult allgather_inproc(const std::vector<Payload>& payloads) {
  const auto n = static_cast<std::uint32_t>(payloads.size());
  if (n == 0) throw std::invalid_argument("no payloads");
  const Schedule sched = allgather_schedule(n);

  AllgatherResult res;
  res.traffic.bytes_sent.assign(n, 0);
  res.traffic.steps = sched.steps;
  res.per_worker.assign(n, std::vector<Payload>(n));
  for (std::uint32_t r = 0; r < n; ++r) res.per_worker[r][r] = payloads[r];
  for (const CommEvent& ev : sched.events) {
    const Payload& moving = res.per_worker[ev.src][ev.chunk];
    res.traffic.add_send(ev.src, moving.size());
    res.per_worker[ev.dst][ev.chunk] = moving;
  }
  return res;
}

NormExchange norm_allreduce_inproc(const std::vector<double>& stats,
                                   const NormSpec& spec, std::uint64_t round) {
  const auto n = static_cast<std::uint32_t>(stats.size());
  std::vector<Payload> payloads(n, Payload(8));
  for (std::uint32_t r = 0; r < n; ++r) {
    std::memcpy(payloads[r].data(), &stats[r], 8);
  }
  const Schedule sched = tree_schedule(n);
  AllreduceResult agg;
  if (spec.p == kNormInf) {
    agg = allreduce_inproc(std::move(payloads), sched, F64MaxOps{}, round);
  } else {
    agg = allreduce_inproc(std::move(payloads), sched, F64SumOps{}, round);
  }
  double combined;
  std::memcpy(&combined, agg.per_worker.front().data(), 8);
  std::vector<double> one{combined};
  NormExchange out;
  // combine_norm_stats applies the final root; the lanes already carry the
  // sum (or max) of per-worker statistics.
  out.value = combine_norm_stats(one, spec);
  out.traffic = agg.traffic;
  return out;
}

}  // namespace gqsgd
