#include "gqsgd/algorithm.hpp"

#include <cstring>
#include <stdexcept>

#include "gqsgd/exp_arith.hpp"
#include "gqsgd/quantizer.hpp"
#include "gqsgd/serialize.hpp"

namespace gqsgd {

std::string to_string(Transport t) {
  return t == Transport::Inproc ? "inproc" : "tcp";
}

Transport transport_from_string(const std::string& name) {
  if (name == "inproc") return Transport::Inproc;
  if (name == "tcp") return Transport::Tcp;
  throw std::invalid_argument("unknown transport: " + name);
}

std::optional<std::uint32_t> standard_lane_width(std::uint32_t s,
                                                 std::uint32_t n,
                                                 std::uint32_t at_least) {
  for (std::uint32_t w : {8u, 16u, 32u, 64u}) {
    if (w >= at_least && check_width(LevelKind::Standard, s, n, w)) return w;
  }
  return std::nullopt;
}

namespace {

struct PathPlan {
  enum class Kind { DenseStd, DenseExp, Sparse } kind = Kind::DenseExp;
  std::uint32_t lane_width = 8;
  std::optional<ReduceContext> ctx;  // set for DenseExp
  MsgType msg = MsgType::Exp;
};

PathPlan plan_path(const GqsgdConfig& cfg) {
  if (cfg.scheme == LevelKind::Custom) {
    throw std::invalid_argument("aggregation requires a named level scheme");
  }
  PathPlan plan;
  if (cfg.sparse) {
    plan.kind = PathPlan::Kind::Sparse;
    plan.lane_width = validate_level_width(cfg.width_bits, cfg.s);
    plan.msg = MsgType::Sparse;
    return plan;
  }
  if (cfg.scheme == LevelKind::Standard) {
    plan.kind = PathPlan::Kind::DenseStd;
    const auto width = standard_lane_width(cfg.s, cfg.workers, cfg.width_bits);
    if (!width) {
      throw std::invalid_argument(
          "refused configuration: level sums cannot fit any integer lane");
    }
    plan.lane_width = *width;
    plan.msg = MsgType::Dense;
    return plan;
  }
  plan.kind = PathPlan::Kind::DenseExp;
  plan.ctx = ReduceContext::make(cfg.s, cfg.workers, cfg.width_bits);
  plan.lane_width = cfg.width_bits;
  plan.msg = MsgType::Exp;
  return plan;
}

Payload encode_dense_std(const QuantizedShard& shard, std::uint32_t s,
                         std::uint32_t lane_width) {
  const std::uint32_t lb = lane_width / 8;
  Payload out(shard.size() * lb);
  for (std::size_t j = 0; j < shard.size(); ++j) {
    const std::int64_t v =
        std::int64_t{shard.sign[j]} * (std::int64_t{s} - shard.level_idx[j]);
    const auto u = static_cast<std::uint64_t>(v);
    for (std::uint32_t i = 0; i < lb; ++i) {
      out[j * lb + i] = static_cast<std::byte>((u >> (8 * i)) & 0xff);
    }
  }
  return out;
}

std::vector<double> decode_dense_std(const Payload& payload, double norm,
                                     std::uint32_t s, std::uint32_t n,
                                     std::uint32_t lane_width) {
  const std::uint32_t lb = lane_width / 8;
  std::vector<double> out(payload.size() / lb);
  const double scale = norm / (static_cast<double>(n) * s);
  for (std::size_t j = 0; j < out.size(); ++j) {
    std::uint64_t u = 0;
    for (std::uint32_t i = 0; i < lb; ++i) {
      u |= static_cast<std::uint64_t>(payload[j * lb + i]) << (8 * i);
    }
    const std::uint32_t bits = lb * 8;
    if (bits < 64 && (u >> (bits - 1)) & 1) u |= ~0ull << bits;
    out[j] = scale * static_cast<double>(static_cast<std::int64_t>(u));
  }
  return out;
}

std::vector<double> decode_dense_exp(const Payload& payload, double norm,
                                     std::uint32_t n, const ReduceContext& ctx) {
  const std::vector<ExpToken> tokens = unpack_tokens(payload, ctx.width_bits);
  std::vector<double> out(tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    out[j] = token_contribution(tokens[j], norm, ctx) / n;
  }
  return out;
}

std::vector<double> decode_sparse_set(const std::vector<Payload>& payloads,
                                      const LevelScheme& scheme,
                                      std::uint32_t lane_width, std::uint32_t n) {
  std::vector<SparseShard> shards;
  shards.reserve(payloads.size());
  for (const Payload& p : payloads) {
    shards.push_back(deserialize_sparse(p, lane_width));
  }
  std::vector<double> acc = accumulate_sparse(shards, scheme);
  for (double& v : acc) v /= n;
  return acc;
}

}  // namespace

MeanResult gqsgd_mean(const std::vector<std::vector<double>>& shards,
                      const GqsgdConfig& cfg, std::uint64_t round) {
  const std::uint32_t n = cfg.workers;
  if (shards.size() != n || n == 0) {
    throw std::invalid_argument("shard count does not match the worker count");
  }
  const std::size_t d = shards.front().size();
  for (const auto& x : shards) {
    if (x.size() != d) throw std::invalid_argument("shard dimensions disagree");
  }

  if (cfg.transport == Transport::Tcp) {
    std::vector<WorkerMeanResult> outs(n);
    run_local_mesh(n, [&](std::uint32_t rank, PeerSockets& peers) {
      outs[rank] = gqsgd_mean_worker(peers, shards[rank], cfg, round);
    });
    MeanResult res;
    res.norm = outs.front().norm;
    res.lane_width_used = outs.front().lane_width_used;
    res.payload_traffic.bytes_sent.assign(n, 0);
    res.norm_traffic.bytes_sent.assign(n, 0);
    for (std::uint32_t r = 0; r < n; ++r) {
      res.per_worker.push_back(std::move(outs[r].mean));
      res.payload_traffic.bytes_sent[r] = outs[r].payload_bytes_sent;
      res.payload_traffic.total_bytes += outs[r].payload_bytes_sent;
      res.norm_traffic.bytes_sent[r] = outs[r].norm_bytes_sent;
      res.norm_traffic.total_bytes += outs[r].norm_bytes_sent;
    }
    return res;
  }

  const PathPlan plan = plan_path(cfg);
  const LevelScheme scheme = cfg.scheme == LevelKind::Standard
                                 ? LevelScheme::standard(cfg.s)
                                 : LevelScheme::exponential(cfg.s);
  const CounterRng rng(cfg.seed);

  MeanResult res;
  res.lane_width_used = plan.lane_width;

  std::vector<double> stats(n);
  for (std::uint32_t r = 0; r < n; ++r) {
    stats[r] = local_norm_stat(shards[r], cfg.norm);
  }
  const NormExchange norm_ex = norm_allreduce_inproc(stats, cfg.norm, round);
  res.norm = norm_ex.value;
  res.norm_traffic = norm_ex.traffic;

  if (res.norm == 0.0) {
    res.per_worker.assign(n, std::vector<double>(d, 0.0));
    return res;
  }

  std::vector<QuantizedShard> quantized;
  quantized.reserve(n);
  for (std::uint32_t r = 0; r < n; ++r) {
    quantized.push_back(
        quantize_shard(shards[r], res.norm, scheme, rng, r, round));
  }

  if (plan.kind == PathPlan::Kind::Sparse) {
    std::vector<Payload> payloads;
    payloads.reserve(n);
    for (const auto& q : quantized) {
      payloads.push_back(serialize_sparse(to_sparse(q, scheme), plan.lane_width));
    }
    AllgatherResult gathered = allgather_inproc(payloads);
    res.payload_traffic = gathered.traffic;
    for (std::uint32_t r = 0; r < n; ++r) {
      res.per_worker.push_back(
          decode_sparse_set(gathered.per_worker[r], scheme, plan.lane_width, n));
    }
    return res;
  }

  const Schedule sched = make_schedule(cfg.topo, n);
  std::vector<Payload> payloads;
  payloads.reserve(n);
  for (const auto& q : quantized) {
    payloads.push_back(plan.kind == PathPlan::Kind::DenseStd
                           ? encode_dense_std(q, cfg.s, plan.lane_width)
                           : pack_tokens(tokens_from_shard(q, *plan.ctx),
                                         plan.lane_width));
  }
  AllreduceResult agg;
  if (plan.kind == PathPlan::Kind::DenseStd) {
    agg = allreduce_inproc(std::move(payloads), sched, IntSumOps{plan.lane_width},
                           round);
  } else {
    agg = allreduce_inproc(std::move(payloads), sched,
                           TokenReduceOps{*plan.ctx, rng}, round);
  }
  res.payload_traffic = agg.traffic;
  for (std::uint32_t r = 0; r < n; ++r) {
    res.per_worker.push_back(
        plan.kind == PathPlan::Kind::DenseStd
            ? decode_dense_std(agg.per_worker[r], res.norm, cfg.s, n,
                               plan.lane_width)
            : decode_dense_exp(agg.per_worker[r], res.norm, n, *plan.ctx));
  }
  return res;
}

WorkerMeanResult gqsgd_mean_worker(PeerSockets& peers,
                                   const std::vector<double>& shard,
                                   const GqsgdConfig& cfg, std::uint64_t round) {
  if (peers.workers() != cfg.workers) {
    throw std::invalid_argument("mesh size does not match the worker count");
  }
  const std::uint32_t rank = peers.rank();
  const PathPlan plan = plan_path(cfg);
  const LevelScheme scheme = cfg.scheme == LevelKind::Standard
                                 ? LevelScheme::standard(cfg.s)
                                 : LevelScheme::exponential(cfg.s);
  const CounterRng rng(cfg.seed);

  WorkerMeanResult out;
  out.lane_width_used = plan.lane_width;

  // Scale phase over the tree, one f64 per worker.
  const double stat = local_norm_stat(shard, cfg.norm);
  Payload stat_payload(8);
  std::memcpy(stat_payload.data(), &stat, 8);
  const Schedule norm_sched = tree_schedule(cfg.workers);
  WorkerOutcome norm_out;
  if (cfg.norm.p == kNormInf) {
    norm_out = run_allreduce_worker(peers, norm_sched, F64MaxOps{},
                                    MsgType::Norm, round, std::move(stat_payload));
  } else {
    norm_out = run_allreduce_worker(peers, norm_sched, F64SumOps{},
                                    MsgType::Norm, round, std::move(stat_payload));
  }
  double combined;
  std::memcpy(&combined, norm_out.payload.data(), 8);
  std::vector<double> one{combined};
  out.norm = combine_norm_stats(one, cfg.norm);
  out.norm_bytes_sent = norm_out.bytes_sent;

  if (out.norm == 0.0) {
    out.mean.assign(shard.size(), 0.0);
    return out;
  }

  const QuantizedShard q = quantize_shard(shard, out.norm, scheme, rng, rank, round);

  if (plan.kind == PathPlan::Kind::Sparse) {
    Payload own = serialize_sparse(to_sparse(q, scheme), plan.lane_width);
    GatherOutcome gathered = run_allgather_worker(
        peers, allgather_schedule(cfg.workers), MsgType::Sparse, round,
        std::move(own));
    out.mean = decode_sparse_set(gathered.payloads, scheme, plan.lane_width,
                                 cfg.workers);
    out.payload_bytes_sent = gathered.bytes_sent;
    return out;
  }

  const Schedule sched = make_schedule(cfg.topo, cfg.workers);
  Payload own = plan.kind == PathPlan::Kind::DenseStd
                    ? encode_dense_std(q, cfg.s, plan.lane_width)
                    : pack_tokens(tokens_from_shard(q, *plan.ctx), plan.lane_width);
  WorkerOutcome agg;
  if (plan.kind == PathPlan::Kind::DenseStd) {
    agg = run_allreduce_worker(peers, sched, IntSumOps{plan.lane_width}, plan.msg,
                               round, std::move(own));
  } else {
    agg = run_allreduce_worker(peers, sched, TokenReduceOps{*plan.ctx, rng},
                               plan.msg, round, std::move(own));
  }
  out.mean = plan.kind == PathPlan::Kind::DenseStd
                 ? decode_dense_std(agg.payload, out.norm, cfg.s, cfg.workers,
                                    plan.lane_width)
                 : decode_dense_exp(agg.payload, out.norm, cfg.workers, *plan.ctx);
  out.payload_bytes_sent = agg.bytes_sent;
  return out;
}

BaselineResult baseline_mean(const std::vector<std::vector<double>>& shards,
                             std::uint32_t workers, TopologyKind topo,
                             Transport transport, std::uint64_t round) {
  if (shards.size() != workers || workers == 0) {
    throw std::invalid_argument("shard count does not match the worker count");
  }
  const std::size_t d = shards.front().size();
  std::vector<Payload> payloads;
  payloads.reserve(workers);
  for (const auto& x : shards) {
    if (x.size() != d) throw std::invalid_argument("shard dimensions disagree");
    Payload p(4 * d);
    for (std::size_t j = 0; j < d; ++j) {
      const float f = static_cast<float>(x[j]);
      std::memcpy(p.data() + 4 * j, &f, 4);
    }
    payloads.push_back(std::move(p));
  }
  const Schedule sched = make_schedule(topo, workers);
  AllreduceResult agg;
  if (transport == Transport::Tcp) {
    agg = allreduce_tcp_local(payloads, sched, F32SumOps{}, MsgType::Dense, round);
  } else {
    agg = allreduce_inproc(std::move(payloads), sched, F32SumOps{}, round);
  }
  BaselineResult res;
  res.traffic = agg.traffic;
  for (std::uint32_t r = 0; r < workers; ++r) {
    std::vector<double> mean(d);
    for (std::size_t j = 0; j < d; ++j) {
      float f;
      std::memcpy(&f, agg.per_worker[r].data() + 4 * j, 4);
      mean[j] = static_cast<double>(f) / workers;
    }
    res.per_worker.push_back(std::move(mean));
  }
  return res;
}

}  // namespace gqsgd
