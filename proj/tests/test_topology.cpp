#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "gqsgd/exp_arith.hpp"
#include "gqsgd/topology.hpp"

using gqsgd::allgather_schedule;
using gqsgd::chunk_lane_range;
using gqsgd::CommEvent;
using gqsgd::CommOp;
using gqsgd::make_schedule;
using gqsgd::ring_schedule;
using gqsgd::Schedule;
using gqsgd::topology_from_string;
using gqsgd::TopologyKind;
using gqsgd::tree_schedule;

namespace {

// Sequential interpreter over integer lanes. Reduce adds the source chunk
// into the destination, Copy overwrites. Valid because within a step no
// worker's outgoing chunk is also written, so in-order application matches
// a parallel execution.
std::vector<std::vector<long long>> run_schedule(
    const Schedule& sched, std::vector<std::vector<long long>> state,
    std::size_t lanes) {
  for (const auto& ev : sched.events) {
    auto [b, e] = chunk_lane_range(lanes, sched.chunks, ev.chunk);
    for (std::size_t l = b; l < e; ++l) {
      if (ev.op == CommOp::Reduce) {
        state[ev.dst][l] += state[ev.src][l];
      } else {
        state[ev.dst][l] = state[ev.src][l];
      }
    }
  }
  return state;
}

bool sorted_by_step_then_src(const Schedule& sched) {
  return std::is_sorted(sched.events.begin(), sched.events.end(),
                        [](const CommEvent& a, const CommEvent& b) {
                          if (a.step != b.step) return a.step < b.step;
                          return a.src < b.src;
                        });
}

// No event in a step writes a (worker, chunk) slot that another event in the
// same step reads.
bool step_conflict_free(const Schedule& sched) {
  for (std::size_t i = 0; i < sched.events.size(); ++i) {
    for (std::size_t j = 0; j < sched.events.size(); ++j) {
      const auto& r = sched.events[i];
      const auto& w = sched.events[j];
      if (r.step != w.step) continue;
      if (r.src == w.dst && r.chunk == w.chunk) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("topology names round-trip") {
  CHECK(to_string(TopologyKind::Tree) == "tree");
  CHECK(to_string(TopologyKind::Ring) == "ring");
  CHECK(topology_from_string("tree") == TopologyKind::Tree);
  CHECK(topology_from_string("ring") == TopologyKind::Ring);
  CHECK_THROWS_AS(topology_from_string("mesh"), std::invalid_argument);
}

TEST_CASE("tree schedule for five workers, exact event list") {
  const Schedule sched = tree_schedule(5);
  CHECK(sched.workers == 5);
  CHECK(sched.chunks == 1);
  CHECK(sched.steps == 6);
  REQUIRE(sched.events.size() == 8);

  const CommEvent want[] = {
      {0, 1, 0, CommOp::Reduce, 0}, {0, 3, 2, CommOp::Reduce, 0},
      {1, 2, 0, CommOp::Reduce, 0}, {2, 4, 0, CommOp::Reduce, 0},
      {3, 0, 4, CommOp::Copy, 0},   {4, 0, 2, CommOp::Copy, 0},
      {5, 0, 1, CommOp::Copy, 0},   {5, 2, 3, CommOp::Copy, 0},
  };
  for (std::size_t i = 0; i < 8; ++i) {
    CAPTURE(i);
    CHECK(sched.events[i].step == want[i].step);
    CHECK(sched.events[i].src == want[i].src);
    CHECK(sched.events[i].dst == want[i].dst);
    CHECK(sched.events[i].op == want[i].op);
    CHECK(sched.events[i].chunk == 0);
  }
}

TEST_CASE("tree schedule shape") {
  for (std::uint32_t n : {2u, 3u, 4u, 7u, 8u, 9u, 16u, 17u}) {
    CAPTURE(n);
    const Schedule sched = tree_schedule(n);
    std::size_t reduces = 0;
    std::size_t copies = 0;
    for (const auto& ev : sched.events) {
      (ev.op == CommOp::Reduce ? reduces : copies)++;
      CHECK(ev.src < n);
      CHECK(ev.dst < n);
      CHECK(ev.step < sched.steps);
    }
    CHECK(reduces == n - 1);
    CHECK(copies == n - 1);
    CHECK(sched.steps == 2 * gqsgd::ceil_log2(n));
    CHECK(sorted_by_step_then_src(sched));
    CHECK(step_conflict_free(sched));
  }
}

TEST_CASE("single worker schedules are empty") {
  for (auto* build : {tree_schedule, ring_schedule, allgather_schedule}) {
    const Schedule sched = build(1);
    CHECK(sched.steps == 0);
    CHECK(sched.events.empty());
  }
  CHECK_THROWS_AS(tree_schedule(0), std::invalid_argument);
  CHECK_THROWS_AS(ring_schedule(0), std::invalid_argument);
  CHECK_THROWS_AS(allgather_schedule(0), std::invalid_argument);
}

TEST_CASE("ring schedule for three workers") {
  const Schedule sched = ring_schedule(3);
  CHECK(sched.workers == 3);
  CHECK(sched.chunks == 3);
  CHECK(sched.steps == 4);
  REQUIRE(sched.events.size() == 12);

  // Reduce-scatter: worker r pushes chunk (r - t) mod n to its successor.
  const CommEvent rs[] = {
      {0, 0, 1, CommOp::Reduce, 0}, {0, 1, 2, CommOp::Reduce, 1},
      {0, 2, 0, CommOp::Reduce, 2}, {1, 0, 1, CommOp::Reduce, 2},
      {1, 1, 2, CommOp::Reduce, 0}, {1, 2, 0, CommOp::Reduce, 1},
  };
  for (std::size_t i = 0; i < 6; ++i) {
    CAPTURE(i);
    CHECK(sched.events[i].step == rs[i].step);
    CHECK(sched.events[i].src == rs[i].src);
    CHECK(sched.events[i].dst == rs[i].dst);
    CHECK(sched.events[i].op == CommOp::Reduce);
    CHECK(sched.events[i].chunk == rs[i].chunk);
  }
  for (std::size_t i = 6; i < 12; ++i) CHECK(sched.events[i].op == CommOp::Copy);
}

TEST_CASE("ring reduce-scatter ends with worker w owning chunk (w+1) mod n") {
  for (std::uint32_t n : {2u, 3u, 4u, 5u, 8u, 13u}) {
    CAPTURE(n);
    const Schedule sched = ring_schedule(n);
    for (const auto& ev : sched.events) {
      if (ev.op != CommOp::Reduce || ev.step != n - 2) continue;
      CHECK(ev.chunk == (ev.dst + 1) % n);
    }
    std::size_t reduces = 0;
    std::size_t copies = 0;
    for (const auto& ev : sched.events) {
      (ev.op == CommOp::Reduce ? reduces : copies)++;
    }
    CHECK(reduces == std::size_t{n} * (n - 1));
    CHECK(copies == std::size_t{n} * (n - 1));
    CHECK(sorted_by_step_then_src(sched));
    CHECK(step_conflict_free(sched));
  }
}

TEST_CASE("interpreted schedules deliver the exact sum to every worker") {
  const std::size_t lanes = 13;
  for (std::uint32_t n = 2; n <= 17; ++n) {
    CAPTURE(n);
    std::vector<std::vector<long long>> init(n,
                                             std::vector<long long>(lanes));
    std::vector<long long> want(lanes, 0);
    for (std::uint32_t w = 0; w < n; ++w) {
      for (std::size_t l = 0; l < lanes; ++l) {
        init[w][l] = 1 + 31 * static_cast<long long>(w) +
                     7 * static_cast<long long>(l);
        want[l] += init[w][l];
      }
    }
    for (TopologyKind kind : {TopologyKind::Tree, TopologyKind::Ring}) {
      CAPTURE(to_string(kind));
      const auto out = run_schedule(make_schedule(kind, n), init, lanes);
      for (std::uint32_t w = 0; w < n; ++w) CHECK(out[w] == want);
    }
  }
}

TEST_CASE("allgather rotation hands every payload to every worker") {
  for (std::uint32_t n : {2u, 3u, 5u, 9u}) {
    CAPTURE(n);
    const Schedule sched = allgather_schedule(n);
    CHECK(sched.steps == n - 1);
    CHECK(sched.events.size() == std::size_t{n} * (n - 1));
    CHECK(sorted_by_step_then_src(sched));
    CHECK(step_conflict_free(sched));

    // slot[w][origin] holds worker w's copy of origin's payload, -1 if absent.
    std::vector<std::vector<long long>> slot(n, std::vector<long long>(n, -1));
    for (std::uint32_t w = 0; w < n; ++w) slot[w][w] = 1000 + w;
    for (const auto& ev : sched.events) {
      CHECK(ev.op == CommOp::Copy);
      REQUIRE(slot[ev.src][ev.chunk] != -1);
      slot[ev.dst][ev.chunk] = slot[ev.src][ev.chunk];
    }
    for (std::uint32_t w = 0; w < n; ++w) {
      for (std::uint32_t o = 0; o < n; ++o) CHECK(slot[w][o] == 1000 + o);
    }
  }
}

TEST_CASE("chunk lane ranges") {
  CHECK(chunk_lane_range(10, 3, 0) == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(chunk_lane_range(10, 3, 1) == std::pair<std::size_t, std::size_t>{3, 6});
  CHECK(chunk_lane_range(10, 3, 2) ==
        std::pair<std::size_t, std::size_t>{6, 10});
  CHECK_THROWS_AS(chunk_lane_range(10, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(chunk_lane_range(10, 0, 0), std::invalid_argument);

  // Ranges always partition [0, lanes), even when lanes < chunks.
  for (std::size_t lanes : {0ul, 1ul, 2ul, 10ul, 37ul}) {
    for (std::uint32_t chunks : {1u, 2u, 3u, 5u, 16u}) {
      CAPTURE(lanes);
      CAPTURE(chunks);
      std::size_t cursor = 0;
      for (std::uint32_t c = 0; c < chunks; ++c) {
        auto [b, e] = chunk_lane_range(lanes, chunks, c);
        CHECK(b == cursor);
        CHECK(b <= e);
        cursor = e;
      }
      CHECK(cursor == lanes);
    }
  }
}
