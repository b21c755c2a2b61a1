#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gqsgd/exp_arith.hpp"
#include "gqsgd/norms.hpp"
#include "gqsgd/rng.hpp"
#include "gqsgd/serialize.hpp"
#include "gqsgd/topology.hpp"

namespace gqsgd {

// Payload bytes each worker pushed into the network, plus schedule shape.
// Frame headers are excluded so the numbers map directly onto the cost
// model's payload size S.
struct TrafficReport {
  std::vector<std::uint64_t> bytes_sent;  // per worker
  std::uint64_t total_bytes = 0;
  std::uint64_t messages = 0;
  std::uint32_t steps = 0;
  std::uint64_t reduce_invocations = 0;

  void add_send(std::uint32_t worker, std::uint64_t bytes) {
    if (worker >= bytes_sent.size()) bytes_sent.resize(worker + 1, 0);
    bytes_sent[worker] += bytes;
    total_bytes += bytes;
    ++messages;
  }

  void merge(const TrafficReport& other);
};

// Element-typed combining of raw payload lanes. Implementations must be pure
// functions of (acc, in, round, step, dst, elem_offset) so both transports
// agree bit for bit.
class PayloadOps {
 public:
  virtual ~PayloadOps() = default;
  virtual std::size_t lane_bytes() const = 0;
  // acc = acc (+) in, where elem_offset is the global lane index of the
  // first lane in the spans (chunked schedules pass interior offsets).
  virtual void combine(std::span<std::byte> acc, std::span<const std::byte> in,
                       std::uint64_t round, std::uint32_t step,
                       std::uint32_t dst, std::uint64_t elem_offset) const = 0;
};

// Signed little-endian integer lanes with overflow detection. Widths 8, 16,
// 32, or 64 bits.
class IntSumOps : public PayloadOps {
 public:
  explicit IntSumOps(std::uint32_t width_bits);
  std::size_t lane_bytes() const override { return width_bits_ / 8; }
  void combine(std::span<std::byte> acc, std::span<const std::byte> in,
               std::uint64_t round, std::uint32_t step, std::uint32_t dst,
               std::uint64_t elem_offset) const override;

 private:
  std::uint32_t width_bits_;
};

class F32SumOps : public PayloadOps {
 public:
  std::size_t lane_bytes() const override { return 4; }
  void combine(std::span<std::byte> acc, std::span<const std::byte> in,
               std::uint64_t round, std::uint32_t step, std::uint32_t dst,
               std::uint64_t elem_offset) const override;
};

class F64SumOps : public PayloadOps {
 public:
  std::size_t lane_bytes() const override { return 8; }
  void combine(std::span<std::byte> acc, std::span<const std::byte> in,
               std::uint64_t round, std::uint32_t step, std::uint32_t dst,
               std::uint64_t elem_offset) const override;
};

class F64MaxOps : public PayloadOps {
 public:
  std::size_t lane_bytes() const override { return 8; }
  void combine(std::span<std::byte> acc, std::span<const std::byte> in,
               std::uint64_t round, std::uint32_t step, std::uint32_t dst,
               std::uint64_t elem_offset) const override;
};

// Pairwise token aggregation on packed exponent lanes; the k draw is keyed
// by (round, step, dst, lane index).
class TokenReduceOps : public PayloadOps {
 public:
  TokenReduceOps(const ReduceContext& ctx, const CounterRng& rng)
      : ctx_(ctx), rng_(rng) {}
  std::size_t lane_bytes() const override { return ctx_.width_bits / 8; }
  void combine(std::span<std::byte> acc, std::span<const std::byte> in,
               std::uint64_t round, std::uint32_t step, std::uint32_t dst,
               std::uint64_t elem_offset) const override;

 private:
  ReduceContext ctx_;
  CounterRng rng_;
};

// Sequential interpreter: walks the schedule over all workers' payloads in
// one thread. The reference semantics every transport must reproduce.
struct AllreduceResult {
  std::vector<Payload> per_worker;
  TrafficReport traffic;
};

AllreduceResult allreduce_inproc(std::vector<Payload> payloads,
                                 const Schedule& sched, const PayloadOps& ops,
                                 std::uint64_t round);

// Every worker ends with copies of all payloads, in rank order. Payload
// sizes may differ per worker (sparse shards do).
struct AllgatherResult {
  std::vector<std::vector<Payload>> per_worker;
  TrafficReport traffic;
};

AllgatherResult allgather_inproc(const std::vector<Payload>& payloads);

// Sum-or-max of one scalar per worker plus the final root, used for the
// global scale. Always runs on the tree schedule; the traffic shows up in
// the separate norm report.
struct NormExchange {
  double value = 0.0;
  TrafficReport traffic;
};

NormExchange norm_allreduce_inproc(const std::vector<double>& stats,
                                   const NormSpec& spec, std::uint64_t round);

}  // namespace gqsgd
