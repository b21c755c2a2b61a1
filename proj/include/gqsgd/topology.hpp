#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gqsgd {

enum class TopologyKind { Tree, Ring };

std::string to_string(TopologyKind kind);
TopologyKind topology_from_string(const std::string& name);

enum class CommOp : std::uint8_t { Reduce, Copy };

// One point-to-point transfer: src sends its current copy of `chunk` to dst,
// which either combines it into its own chunk (Reduce) or overwrites
// (Copy). Events sharing a step are logically concurrent; the schedules are
// built so that within a step no worker's outgoing chunk is also written,
// which lets a sequential interpreter and a parallel transport produce
// identical bytes.
struct CommEvent {
  std::uint32_t step = 0;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  CommOp op = CommOp::Reduce;
  std::uint32_t chunk = 0;
};

struct Schedule {
  std::uint32_t workers = 0;
  std::uint32_t steps = 0;
  std::uint32_t chunks = 1;
  std::vector<CommEvent> events;  // ordered by step, then source
};

// Recursive halving onto rank 0, then the mirrored broadcast. ceil(log2 n)
// steps each way, exactly n - 1 reduce events, whole payload per transfer.
Schedule tree_schedule(std::uint32_t workers);

// Reduce-scatter followed by allgather around the ring, n chunks. Every
// worker sends 2(n - 1) chunks of roughly 1/n of the payload.
Schedule ring_schedule(std::uint32_t workers);

Schedule make_schedule(TopologyKind kind, std::uint32_t workers);

// Rotation that hands every worker a copy of every payload in n - 1 steps;
// `chunk` carries the origin rank of the forwarded payload.
Schedule allgather_schedule(std::uint32_t workers);

// Lane range [begin, end) of chunk c when `lanes` lanes are cut into
// `chunks` nearly equal runs.
std::pair<std::size_t, std::size_t> chunk_lane_range(std::size_t lanes,
                                                     std::uint32_t chunks,
                                                     std::uint32_t c);

}  // namespace gqsgd
