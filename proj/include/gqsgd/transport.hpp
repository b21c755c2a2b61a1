#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gqsgd/collectives.hpp"
#include "gqsgd/serialize.hpp"
#include "gqsgd/topology.hpp"

namespace gqsgd {

// Socket framing. Every message is
//   [0x47 0x51][type u8][round u32][len u32][payload len bytes]
// little-endian. Anything that fails validation on receive raises
// std::domain_error (bad magic / unknown type) or std::runtime_error
// (short read, timeout, unexpected round).
enum class MsgType : std::uint8_t {
  Norm = 1,
  Dense = 2,
  Sparse = 3,
  Exp = 4,
  Ctrl = 5,
};

inline constexpr std::size_t kFrameHeaderBytes = 11;

struct FrameHeader {
  MsgType type = MsgType::Ctrl;
  std::uint32_t round = 0;
  std::uint32_t length = 0;
};

void encode_frame_header(const FrameHeader& h, std::byte out[kFrameHeaderBytes]);
FrameHeader decode_frame_header(const std::byte bytes[kFrameHeaderBytes]);

// A connected full mesh of loopback (or remote) workers. send/recv move one
// frame; rank pairing and in-order TCP delivery make tags unnecessary.
class PeerSockets {
 public:
  PeerSockets(std::uint32_t rank, std::vector<int> fds)
      : rank_(rank), fds_(std::move(fds)) {}
  PeerSockets(const PeerSockets&) = delete;
  PeerSockets& operator=(const PeerSockets&) = delete;
  PeerSockets(PeerSockets&& other) noexcept;
  ~PeerSockets();

  std::uint32_t rank() const { return rank_; }
  std::uint32_t workers() const { return static_cast<std::uint32_t>(fds_.size()); }

  void send_frame(std::uint32_t peer, MsgType type, std::uint32_t round,
                  std::span<const std::byte> payload);
  Payload recv_frame(std::uint32_t peer, MsgType expect_type,
                     std::uint32_t expect_round);

 private:
  std::uint32_t rank_;
  std::vector<int> fds_;  // fds_[rank_] is -1
};

// Walks the schedule from one worker's perspective: sends its chunks when it
// is the source, receives and combines when it is the destination. Returns
// this worker's final payload and its own sent-bytes accounting.
struct WorkerOutcome {
  Payload payload;
  std::uint64_t bytes_sent = 0;
  std::uint64_t messages = 0;
  std::uint64_t reduce_invocations = 0;
};

WorkerOutcome run_allreduce_worker(PeerSockets& peers, const Schedule& sched,
                                   const PayloadOps& ops, MsgType type,
                                   std::uint64_t round, Payload payload);

// Allgather counterpart; returns all workers' payloads in rank order.
struct GatherOutcome {
  std::vector<Payload> payloads;
  std::uint64_t bytes_sent = 0;
  std::uint64_t messages = 0;
};

GatherOutcome run_allgather_worker(PeerSockets& peers, const Schedule& sched,
                                   MsgType type, std::uint64_t round,
                                   Payload own);

// Builds the loopback mesh for `workers` ranks inside this process and runs
// `body(rank, peers)` on a thread per rank. Exceptions from any worker are
// rethrown after all threads join.
void run_local_mesh(std::uint32_t workers,
                    const std::function<void(std::uint32_t, PeerSockets&)>& body);

// Full mesh across processes: `endpoints[rank]` is "host:port"; this process
// binds endpoints[rank] and connects to every peer. Lower ranks accept from
// higher ranks.
PeerSockets connect_mesh(std::uint32_t rank,
                         const std::vector<std::string>& endpoints);

// TCP-threaded allreduce over loopback with the same signature shape as the
// sequential interpreter; used to cross-check transports.
AllreduceResult allreduce_tcp_local(const std::vector<Payload>& payloads,
                                    const Schedule& sched, const PayloadOps& ops,
                                    MsgType type, std::uint64_t round);

AllgatherResult allgather_tcp_local(const std::vector<Payload>& payloads,
                                    std::uint64_t round);

}  // namespace gqsgd
