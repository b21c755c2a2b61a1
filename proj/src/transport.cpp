#include "gqsgd/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace gqsgd {

namespace {

constexpr std::byte kMagic0{0x47};
constexpr std::byte kMagic1{0x51};

void close_quiet(int fd) {
  if (fd >= 0) ::close(fd);
}

[[noreturn]] void sys_fail(const char* what) {
  throw std::runtime_error(std::string(what) + ": " + std::strerror(errno));
}

void send_all(int fd, const std::byte* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void recv_all(int fd, std::byte* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        throw std::runtime_error("timed out waiting for a frame");
      }
      sys_fail("recv");
    }
    if (n == 0) throw std::runtime_error("peer closed the connection mid-frame");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void tune_socket(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  timeval tv{};
  tv.tv_sec = 30;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("endpoint must be host:port, got " + text);
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  const unsigned long port = std::stoul(text.substr(colon + 1));
  if (port == 0 || port > 65535) throw std::invalid_argument("bad port in " + text);
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("endpoint host must be an IPv4 address: " + ep.host);
  }
  return addr;
}

int listen_on(const Endpoint& ep) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(ep);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    close_quiet(fd);
    sys_fail("bind");
  }
  if (::listen(fd, SOMAXCONN) < 0) {
    close_quiet(fd);
    sys_fail("listen");
  }
  return fd;
}

int connect_with_retry(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  for (int attempt = 0; attempt < 300; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      return fd;
    }
    close_quiet(fd);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  throw std::runtime_error("could not connect to " + ep.host + ":" +
                           std::to_string(ep.port));
}

PeerSockets connect_mesh_with_listener(std::uint32_t rank,
                                       const std::vector<std::string>& endpoints,
                                       int listen_fd) {
  const auto n = static_cast<std::uint32_t>(endpoints.size());
  if (rank >= n) throw std::invalid_argument("rank outside the endpoint list");
  std::vector<int> fds(n, -1);
  try {
    // Connect to every lower rank, identifying ourselves with a hello frame.
    for (std::uint32_t q = 0; q < rank; ++q) {
      const int fd = connect_with_retry(parse_endpoint(endpoints[q]));
      tune_socket(fd);
      FrameHeader hello{MsgType::Ctrl, rank, 0};
      std::byte head[kFrameHeaderBytes];
      encode_frame_header(hello, head);
      send_all(fd, head, kFrameHeaderBytes);
      fds[q] = fd;
    }
    // Accept one connection from every higher rank; the hello tells us who.
    for (std::uint32_t q = rank + 1; q < n; ++q) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) sys_fail("accept");
      tune_socket(fd);
      std::byte head[kFrameHeaderBytes];
      recv_all(fd, head, kFrameHeaderBytes);
      const FrameHeader hello = decode_frame_header(head);
      if (hello.type != MsgType::Ctrl || hello.round >= n ||
          hello.round <= rank || fds[hello.round] != -1 || hello.length != 0) {
        close_quiet(fd);
        throw std::domain_error("bad mesh hello");
      }
      fds[hello.round] = fd;
    }
  } catch (...) {
    for (int fd : fds) close_quiet(fd);
    close_quiet(listen_fd);
    throw;
  }
  close_quiet(listen_fd);
  return PeerSockets(rank, std::move(fds));
}

}  // namespace

void encode_frame_header(const FrameHeader& h, std::byte out[kFrameHeaderBytes]) {
  out[0] = kMagic0;
  out[1] = kMagic1;
  out[2] = static_cast<std::byte>(h.type);
  for (int i = 0; i < 4; ++i) {
    out[3 + i] = static_cast<std::byte>((h.round >> (8 * i)) & 0xff);
    out[7 + i] = static_cast<std::byte>((h.length >> (8 * i)) & 0xff);
  }
}

FrameHeader decode_frame_header(const std::byte bytes[kFrameHeaderBytes]) {
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) {
    throw std::domain_error("bad frame magic");
  }
  const auto type = static_cast<std::uint8_t>(bytes[2]);
  if (type < 1 || type > 5) throw std::domain_error("unknown frame type");
  FrameHeader h;
  h.type = static_cast<MsgType>(type);
  for (int i = 0; i < 4; ++i) {
    h.round |= static_cast<std::uint32_t>(bytes[3 + i]) << (8 * i);
    h.length |= static_cast<std::uint32_t>(bytes[7 + i]) << (8 * i);
  }
  return h;
}

PeerSockets::PeerSockets(PeerSockets&& other) noexcept
    : rank_(other.rank_), fds_(std::move(other.fds_)) {
  other.fds_.clear();
}

PeerSockets::~PeerSockets() {
  for (int fd : fds_) close_quiet(fd);
}

void PeerSockets::send_frame(std::uint32_t peer, MsgType type,
                             std::uint32_t round,
                             std::span<const std::byte> payload) {
  if (peer >= fds_.size() || fds_[peer] < 0) {
    throw std::invalid_argument("no connection to that peer");
  }
  FrameHeader h{type, round, static_cast<std::uint32_t>(payload.size())};
  std::byte head[kFrameHeaderBytes];
  encode_frame_header(h, head);
  send_all(fds_[peer], head, kFrameHeaderBytes);
  if (!payload.empty()) send_all(fds_[peer], payload.data(), payload.size());
}

Payload PeerSockets::recv_frame(std::uint32_t peer, MsgType expect_type,
                                std::uint32_t expect_round) {
  if (peer >= fds_.size() || fds_[peer] < 0) {
    throw std::invalid_argument("no connection to that peer");
  }
  std::byte head[kFrameHeaderBytes];
  recv_all(fds_[peer], head, kFrameHeaderBytes);
  const FrameHeader h = decode_frame_header(head);
  if (h.type != expect_type || h.round != expect_round) {
    throw std::runtime_error("frame does not match the expected step");
  }
  Payload payload(h.length);
  if (h.length > 0) recv_all(fds_[peer], payload.data(), h.length);
  return payload;
}

WorkerOutcome run_allreduce_worker(PeerSockets& peers, const Schedule& sched,
                                   const PayloadOps& ops, MsgType type,
                                   std::uint64_t round, Payload payload) {
  const std::size_t lb = ops.lane_bytes();
  if (payload.size() % lb != 0) {
    throw std::invalid_argument("payload is not lane-aligned");
  }
  const std::size_t lanes = payload.size() / lb;
  const auto round32 = static_cast<std::uint32_t>(round);
  WorkerOutcome out;
  for (const CommEvent& ev : sched.events) {
    if (ev.src != peers.rank() && ev.dst != peers.rank()) continue;
    const auto [lane_begin, lane_end] = chunk_lane_range(lanes, sched.chunks, ev.chunk);
    const std::size_t off = lane_begin * lb;
    const std::size_t len = (lane_end - lane_begin) * lb;
    if (ev.src == peers.rank()) {
      peers.send_frame(ev.dst, type, round32, {payload.data() + off, len});
      out.bytes_sent += len;
      ++out.messages;
    } else {
      const Payload incoming = peers.recv_frame(ev.src, type, round32);
      if (incoming.size() != len) {
        throw std::runtime_error("frame length does not match the schedule");
      }
      std::span<std::byte> dst_span{payload.data() + off, len};
      if (ev.op == CommOp::Reduce) {
        ops.combine(dst_span, incoming, round, ev.step, ev.dst, lane_begin);
        ++out.reduce_invocations;
      } else {
        std::copy(incoming.begin(), incoming.end(), dst_span.begin());
      }
    }
  }
  out.payload = std::move(payload);
  return out;
}

GatherOutcome run_allgather_worker(PeerSockets& peers, const Schedule& sched,
                                   MsgType type, std::uint64_t round,
                                   Payload own) {
  const auto round32 = static_cast<std::uint32_t>(round);
  GatherOutcome out;
  out.payloads.assign(peers.workers(), {});
  out.payloads[peers.rank()] = std::move(own);
  for (const CommEvent& ev : sched.events) {
    if (ev.src == peers.rank()) {
      const Payload& moving = out.payloads[ev.chunk];
      peers.send_frame(ev.dst, type, round32, moving);
      out.bytes_sent += moving.size();
      ++out.messages;
    } else if (ev.dst == peers.rank()) {
      out.payloads[ev.chunk] = peers.recv_frame(ev.src, type, round32);
    }
  }
  return out;
}

PeerSockets connect_mesh(std::uint32_t rank,
                         const std::vector<std::string>& endpoints) {
  const int listen_fd = listen_on(parse_endpoint(endpoints.at(rank)));
  return connect_mesh_with_listener(rank, endpoints, listen_fd);
}

void run_local_mesh(std::uint32_t workers,
                    const std::function<void(std::uint32_t, PeerSockets&)>& body) {
  if (workers == 0) throw std::invalid_argument("worker count must be >= 1");
  // Bind every rank's listener up front so the endpoint list is complete
  // before any thread starts connecting.
  std::vector<int> listeners(workers, -1);
  std::vector<std::string> endpoints(workers);
  try {
    for (std::uint32_t r = 0; r < workers; ++r) {
      listeners[r] = listen_on(Endpoint{"127.0.0.1", 0});
      sockaddr_in addr{};
      socklen_t len = sizeof(addr);
      if (::getsockname(listeners[r], reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
        sys_fail("getsockname");
      }
      endpoints[r] = "127.0.0.1:" + std::to_string(ntohs(addr.sin_port));
    }
  } catch (...) {
    for (int fd : listeners) close_quiet(fd);
    throw;
  }

  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  threads.reserve(workers);
  for (std::uint32_t r = 0; r < workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        PeerSockets peers = connect_mesh_with_listener(r, endpoints, listeners[r]);
        body(r, peers);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

AllreduceResult allreduce_tcp_local(const std::vector<Payload>& payloads,
                                    const Schedule& sched, const PayloadOps& ops,
                                    MsgType type, std::uint64_t round) {
  const auto n = static_cast<std::uint32_t>(payloads.size());
  if (n != sched.workers) {
    throw std::invalid_argument("payload count does not match the schedule");
  }
  AllreduceResult res;
  res.per_worker.assign(n, {});
  res.traffic.bytes_sent.assign(n, 0);
  res.traffic.steps = sched.steps;
  std::vector<WorkerOutcome> outcomes(n);
  run_local_mesh(n, [&](std::uint32_t rank, PeerSockets& peers) {
    outcomes[rank] =
        run_allreduce_worker(peers, sched, ops, type, round, payloads[rank]);
  });
  for (std::uint32_t r = 0; r < n; ++r) {
    res.per_worker[r] = std::move(outcomes[r].payload);
    res.traffic.bytes_sent[r] = outcomes[r].bytes_sent;
    res.traffic.total_bytes += outcomes[r].bytes_sent;
    res.traffic.messages += outcomes[r].messages;
    res.traffic.reduce_invocations += outcomes[r].reduce_invocations;
  }
  return res;
}

AllgatherResult allgather_tcp_local(const std::vector<Payload>& payloads,
                                    std::uint64_t round) {
  const auto n = static_cast<std::uint32_t>(payloads.size());
  const Schedule sched = allgather_schedule(n);
  AllgatherResult res;
  res.per_worker.assign(n, {});
  res.traffic.bytes_sent.assign(n, 0);
  res.traffic.steps = sched.steps;
  std::vector<GatherOutcome> outcomes(n);
  run_local_mesh(n, [&](std::uint32_t rank, PeerSockets& peers) {
    outcomes[rank] = run_allgather_worker(peers, sched, MsgType::Sparse,
                                          round, payloads[rank]);
  });
  for (std::uint32_t r = 0; r < n; ++r) {
    res.per_worker[r] = std::move(outcomes[r].payloads);
    res.traffic.bytes_sent[r] = outcomes[r].bytes_sent;
    res.traffic.total_bytes += outcomes[r].bytes_sent;
    res.traffic.messages += outcomes[r].messages;
  }
  return res;
}

}  // namespace gqsgd
