#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gqsgd/collectives.hpp"
#include "gqsgd/levels.hpp"
#include "gqsgd/norms.hpp"
#include "gqsgd/topology.hpp"
#include "gqsgd/transport.hpp"

namespace gqsgd {

enum class Transport { Inproc, Tcp };

std::string to_string(Transport t);
Transport transport_from_string(const std::string& name);

struct GqsgdConfig {
  std::uint32_t workers = 4;
  LevelKind scheme = LevelKind::Exponential;
  std::uint32_t s = 7;
  NormSpec norm{};                 // q = p = inf by default
  bool sparse = false;             // allgather the nonzeros instead of dense lanes
  std::uint32_t width_bits = 8;    // token lane width (dense exponential) or
                                   // level lane width (sparse payloads)
  TopologyKind topo = TopologyKind::Tree;
  Transport transport = Transport::Inproc;
  std::uint64_t seed = 1;
};

// Mean estimate every worker ends up holding, plus the traffic split into
// the gradient payload phase and the scalar norm phase.
struct MeanResult {
  std::vector<std::vector<double>> per_worker;
  double norm = 0.0;
  std::uint32_t lane_width_used = 0;  // dense standard lanes may widen
  TrafficReport payload_traffic;
  TrafficReport norm_traffic;

  const std::vector<double>& mean() const { return per_worker.front(); }
};

// Quantized mean of the shards: global scale exchange, per-worker
// quantization keyed by (seed, worker, round), then one of three transports
// for the aggregate:
//   dense standard    - integer level sums (lanes widen to fit n workers)
//   dense exponential - token arithmetic inside the allreduce; the
//                       configuration is refused when the exponent range
//                       does not fit width_bits
//   sparse            - allgather of nonzero entries, summed locally
// Every worker's decoded result is bit-identical; run with cfg.transport =
// Tcp to execute the same schedule over loopback sockets.
MeanResult gqsgd_mean(const std::vector<std::vector<double>>& shards,
                      const GqsgdConfig& cfg, std::uint64_t round);

// The same worker procedure against an already connected mesh; this is what
// each rank of a multi-process run executes. `shard` is this rank's data.
struct WorkerMeanResult {
  std::vector<double> mean;
  double norm = 0.0;
  std::uint32_t lane_width_used = 0;
  std::uint64_t payload_bytes_sent = 0;
  std::uint64_t norm_bytes_sent = 0;
};

WorkerMeanResult gqsgd_mean_worker(PeerSockets& peers,
                                   const std::vector<double>& shard,
                                   const GqsgdConfig& cfg, std::uint64_t round);

// Exact within-f64 mean over an f32 transport, the uncompressed reference
// path. Gradients are cast to f32 lanes and summed over the same schedules.
struct BaselineResult {
  std::vector<std::vector<double>> per_worker;
  TrafficReport traffic;
};

BaselineResult baseline_mean(const std::vector<std::vector<double>>& shards,
                             std::uint32_t workers, TopologyKind topo,
                             Transport transport, std::uint64_t round);

// Smallest admissible dense-standard lane width for (s, n), or nullopt.
std::optional<std::uint32_t> standard_lane_width(std::uint32_t s,
                                                 std::uint32_t n,
                                                 std::uint32_t at_least);

}  // namespace gqsgd
