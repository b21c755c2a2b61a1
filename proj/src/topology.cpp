#include "gqsgd/topology.hpp"

#include <stdexcept>

#include "gqsgd/exp_arith.hpp"

namespace gqsgd {

std::string to_string(TopologyKind kind) {
  return kind == TopologyKind::Tree ? "tree" : "ring";
}

TopologyKind topology_from_string(const std::string& name) {
  if (name == "tree") return TopologyKind::Tree;
  if (name == "ring") return TopologyKind::Ring;
  throw std::invalid_argument("unknown topology: " + name);
}

Schedule tree_schedule(std::uint32_t workers) {
  if (workers == 0) throw std::invalid_argument("worker count must be >= 1");
  Schedule sched;
  sched.workers = workers;
  sched.chunks = 1;
  if (workers == 1) {
    sched.steps = 0;
    return sched;
  }
  const std::uint32_t height = ceil_log2(workers);
  for (std::uint32_t t = 0; t < height; ++t) {
    const std::uint32_t span = 1u << t;
    for (std::uint32_t r = span; r < workers; r += 2 * span) {
      sched.events.push_back({t, r, r - span, CommOp::Reduce, 0});
    }
  }
  for (std::uint32_t t = 0; t < height; ++t) {
    const std::uint32_t span = 1u << (height - 1 - t);
    for (std::uint32_t r = 0; r + span < workers; r += 2 * span) {
      sched.events.push_back({height + t, r, r + span, CommOp::Copy, 0});
    }
  }
  sched.steps = 2 * height;
  return sched;
}

Schedule ring_schedule(std::uint32_t workers) {
  if (workers == 0) throw std::invalid_argument("worker count must be >= 1");
  Schedule sched;
  sched.workers = workers;
  sched.chunks = workers;
  if (workers == 1) {
    sched.steps = 0;
    return sched;
  }
  const std::uint32_t n = workers;
  // Reduce-scatter: after step t every worker has folded t + 2 inputs into
  // chunk (r - t); worker r ends up owning the complete chunk (r + 1) mod n.
  for (std::uint32_t t = 0; t + 1 < n; ++t) {
    for (std::uint32_t r = 0; r < n; ++r) {
      const std::uint32_t chunk = (r + n - t % n) % n;
      sched.events.push_back({t, r, (r + 1) % n, CommOp::Reduce, chunk});
    }
  }
  // Allgather: circulate the completed chunks.
  for (std::uint32_t t = 0; t + 1 < n; ++t) {
    for (std::uint32_t r = 0; r < n; ++r) {
      const std::uint32_t chunk = (r + 1 + n - t % n) % n;
      sched.events.push_back({n - 1 + t, r, (r + 1) % n, CommOp::Copy, chunk});
    }
  }
  sched.steps = 2 * (n - 1);
  return sched;
}

Schedule make_schedule(TopologyKind kind, std::uint32_t workers) {
  return kind == TopologyKind::Tree ? tree_schedule(workers)
                                    : ring_schedule(workers);
}

Schedule allgather_schedule(std::uint32_t workers) {
  if (workers == 0) throw std::invalid_argument("worker count must be >= 1");
  Schedule sched;
  sched.workers = workers;
  sched.chunks = workers;
  if (workers == 1) {
    sched.steps = 0;
    return sched;
  }
  const std::uint32_t n = workers;
  for (std::uint32_t t = 0; t + 1 < n; ++t) {
    for (std::uint32_t r = 0; r < n; ++r) {
      const std::uint32_t origin = (r + n - t % n) % n;
      sched.events.push_back({t, r, (r + 1) % n, CommOp::Copy, origin});
    }
  }
  sched.steps = n - 1;
  return sched;
}

std::pair<std::size_t, std::size_t> chunk_lane_range(std::size_t lanes,
                                                     std::uint32_t chunks,
                                                     std::uint32_t c) {
  if (chunks == 0 || c >= chunks) throw std::invalid_argument("bad chunk index");
  const std::size_t begin = lanes * c / chunks;
  const std::size_t end = lanes * (c + 1) / chunks;
  return {begin, end};
}

}  // namespace gqsgd
