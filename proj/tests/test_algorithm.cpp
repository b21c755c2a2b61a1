#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "gqsgd/algorithm.hpp"

using gqsgd::baseline_mean;
using gqsgd::GqsgdConfig;
using gqsgd::gqsgd_mean;
using gqsgd::LevelKind;
using gqsgd::MeanResult;
using gqsgd::NormSpec;
using gqsgd::standard_lane_width;
using gqsgd::TopologyKind;
using gqsgd::Transport;
using gqsgd::transport_from_string;

namespace {

std::vector<std::vector<double>> toy_shards(std::uint32_t n, std::size_t d,
                                            double amp) {
  std::vector<std::vector<double>> shards(n, std::vector<double>(d));
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      shards[r][j] = amp * std::sin(0.7 * static_cast<double>(r + 1) +
                                    1.3 * static_cast<double>(j));
    }
  }
  return shards;
}

std::vector<double> exact_mean(const std::vector<std::vector<double>>& shards) {
  std::vector<double> mean(shards.front().size(), 0.0);
  for (const auto& s : shards) {
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += s[j];
  }
  for (double& v : mean) v /= static_cast<double>(shards.size());
  return mean;
}

}  // namespace

TEST_CASE("transport names round-trip") {
  CHECK(to_string(Transport::Inproc) == "inproc");
  CHECK(to_string(Transport::Tcp) == "tcp");
  CHECK(transport_from_string("inproc") == Transport::Inproc);
  CHECK(transport_from_string("tcp") == Transport::Tcp);
  CHECK_THROWS_AS(transport_from_string("mpi"), std::invalid_argument);
}

TEST_CASE("standard lane widths widen to hold the level sums") {
  // Signed lanes must hold n * (s + 1).
  CHECK(standard_lane_width(7, 8, 8) == 8);     // 64 <= 2^7
  CHECK(standard_lane_width(15, 8, 8) == 8);    // 128 <= 2^7
  CHECK(standard_lane_width(15, 9, 8) == 16);   // 144 > 2^7
  CHECK(standard_lane_width(7, 255, 8) == 16);  // 2040 <= 2^15
  CHECK(standard_lane_width(255, 255, 8) == 32);
  CHECK(standard_lane_width(1, 2, 32) == 32);  // at_least is a floor
  // Lanes top out at 32 bits.
  CHECK(!standard_lane_width(255, 1u << 24, 8).has_value());
}

TEST_CASE("all-zero shards short-circuit with zero traffic") {
  GqsgdConfig cfg;
  cfg.workers = 3;
  const auto res = gqsgd_mean(std::vector<std::vector<double>>(
                                  3, std::vector<double>(5, 0.0)),
                              cfg, 0);
  CHECK(res.norm == 0.0);
  CHECK(res.payload_traffic.total_bytes == 0);
  REQUIRE(res.per_worker.size() == 3);
  for (const auto& m : res.per_worker) {
    CHECK(m == std::vector<double>(5, 0.0));
  }
}

TEST_CASE("dense standard and sparse paths decode to the same mean") {
  // Dyadic norm and levels make both decode orders exact, so the two
  // transports of the same quantized shards must agree bitwise.
  const std::uint32_t n = 4;
  const std::size_t d = 16;
  auto shards = toy_shards(n, d, 1.25);
  shards[0][3] = 2.0;  // pins the global linf norm to a power of two
  GqsgdConfig cfg;
  cfg.workers = n;
  cfg.scheme = LevelKind::Standard;
  cfg.s = 4;
  cfg.seed = 11;

  cfg.sparse = false;
  const auto dense = gqsgd_mean(shards, cfg, 1);
  CHECK(dense.norm == 2.0);
  cfg.sparse = true;
  const auto sparse = gqsgd_mean(shards, cfg, 1);
  CHECK(sparse.norm == 2.0);
  REQUIRE(dense.mean().size() == d);
  for (std::size_t j = 0; j < d; ++j) {
    CAPTURE(j);
    CHECK(dense.mean()[j] == sparse.mean()[j]);
  }
}

TEST_CASE("every worker decodes the identical vector") {
  const auto shards = toy_shards(5, 33, 0.8);
  for (bool sparse : {false, true}) {
    for (LevelKind scheme : {LevelKind::Standard, LevelKind::Exponential}) {
      GqsgdConfig cfg;
      cfg.workers = 5;
      cfg.scheme = scheme;
      cfg.s = scheme == LevelKind::Standard ? 15 : 7;
      cfg.sparse = sparse;
      cfg.topo = TopologyKind::Ring;
      CAPTURE(sparse);
      CAPTURE(static_cast<int>(scheme));
      const auto res = gqsgd_mean(shards, cfg, 3);
      REQUIRE(res.per_worker.size() == 5);
      for (std::uint32_t r = 1; r < 5; ++r) {
        CHECK(res.per_worker[r] == res.per_worker[0]);
      }
    }
  }
}

TEST_CASE("repeated rounds on an awkward shape stay finite and consistent") {
  const auto shards = toy_shards(5, 33, 1.0);
  GqsgdConfig cfg;
  cfg.workers = 5;
  cfg.scheme = LevelKind::Exponential;
  cfg.s = 7;
  cfg.topo = TopologyKind::Ring;
  for (std::uint64_t round = 0; round < 200; ++round) {
    const auto res = gqsgd_mean(shards, cfg, round);
    for (std::uint32_t r = 1; r < 5; ++r) {
      REQUIRE(res.per_worker[r] == res.per_worker[0]);
    }
    for (double v : res.mean()) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("runs are reproducible and keyed by seed") {
  const auto shards = toy_shards(4, 24, 1.0);
  GqsgdConfig cfg;
  cfg.workers = 4;
  const auto a = gqsgd_mean(shards, cfg, 9);
  const auto b = gqsgd_mean(shards, cfg, 9);
  CHECK(a.mean() == b.mean());
  CHECK(a.norm == b.norm);

  cfg.seed = 2;
  const auto c = gqsgd_mean(shards, cfg, 9);
  CHECK(c.mean() != a.mean());
}

TEST_CASE("baseline mean is exact on f32-representable shards") {
  const std::uint32_t n = 4;
  const std::size_t d = 64;
  std::vector<std::vector<double>> shards(n, std::vector<double>(d));
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      shards[r][j] = 0.25 * static_cast<double>(j % 8) - 0.5 * r;
    }
  }
  const auto want = exact_mean(shards);
  for (TopologyKind topo : {TopologyKind::Tree, TopologyKind::Ring}) {
    for (Transport tr : {Transport::Inproc, Transport::Tcp}) {
      CAPTURE(to_string(topo));
      CAPTURE(to_string(tr));
      const auto res = baseline_mean(shards, n, topo, tr, 0);
      for (std::uint32_t r = 0; r < n; ++r) {
        CHECK(res.per_worker[r] == want);
      }
      CHECK(res.traffic.total_bytes == 2 * (n - 1) * 4 * d);
    }
  }
}

TEST_CASE("traffic split for the dense exponential path") {
  const std::uint32_t n = 4;
  const std::size_t d = 64;
  const auto shards = toy_shards(n, d, 1.0);
  GqsgdConfig cfg;
  cfg.workers = n;
  const auto res = gqsgd_mean(shards, cfg, 0);
  CHECK(res.lane_width_used == 8);
  // Tree allreduce: 2(n-1) transfers of d one-byte lanes, plus the f64
  // scale exchanged over the same tree.
  CHECK(res.payload_traffic.total_bytes == 2 * (n - 1) * d);
  CHECK(res.norm_traffic.total_bytes == 2 * (n - 1) * 8);
  const auto base = baseline_mean(shards, n, TopologyKind::Tree,
                                  Transport::Inproc, 0);
  CHECK(base.traffic.total_bytes == 4 * res.payload_traffic.total_bytes);
}

TEST_CASE("dense standard lane width surfaces in the result") {
  const auto shards = toy_shards(4, 8, 1.0);
  GqsgdConfig cfg;
  cfg.workers = 4;
  cfg.scheme = LevelKind::Standard;
  cfg.s = 255;
  const auto res = gqsgd_mean(shards, cfg, 0);
  CHECK(res.lane_width_used == 16);  // 4 * 256 needs more than 8-bit lanes
}

TEST_CASE("configuration rejections") {
  const auto shards = toy_shards(2, 4, 1.0);
  GqsgdConfig cfg;
  cfg.workers = 2;
  cfg.scheme = LevelKind::Custom;
  CHECK_THROWS_AS(gqsgd_mean(shards, cfg, 0), std::invalid_argument);

  GqsgdConfig mismatch;
  mismatch.workers = 3;
  CHECK_THROWS_AS(gqsgd_mean(shards, mismatch, 0), std::invalid_argument);

  std::vector<std::vector<double>> ragged{{1.0, 2.0}, {3.0}};
  GqsgdConfig two;
  two.workers = 2;
  CHECK_THROWS_AS(gqsgd_mean(ragged, two, 0), std::invalid_argument);
}

TEST_CASE("tcp transport reproduces the in-process mean") {
  const auto shards = toy_shards(3, 10, 1.0);
  for (bool sparse : {false, true}) {
    GqsgdConfig cfg;
    cfg.workers = 3;
    cfg.sparse = sparse;
    cfg.topo = TopologyKind::Ring;
    CAPTURE(sparse);
    cfg.transport = Transport::Inproc;
    const auto inproc = gqsgd_mean(shards, cfg, 5);
    cfg.transport = Transport::Tcp;
    const auto tcp = gqsgd_mean(shards, cfg, 5);
    CHECK(tcp.norm == inproc.norm);
    REQUIRE(tcp.per_worker.size() == 3);
    for (std::uint32_t r = 0; r < 3; ++r) {
      CHECK(tcp.per_worker[r] == inproc.per_worker[r]);
    }
  }
}
