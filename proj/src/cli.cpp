#include "gqsgd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gqsgd/algorithm.hpp"
#include "gqsgd/exp_arith.hpp"
#include "gqsgd/perf_model.hpp"
#include "gqsgd/quantizer.hpp"
#include "gqsgd/serialize.hpp"
#include "gqsgd/trainer.hpp"
#include "gqsgd/verify.hpp"

namespace gqsgd {

namespace {

using nlohmann::json;

std::vector<double> read_values(const std::string& path, std::size_t expect) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open input file: " + path);
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw std::invalid_argument("non-numeric data in " + path);
  if (expect != 0 && values.size() != expect) {
    throw std::invalid_argument("expected " + std::to_string(expect) +
                                " values in " + path + ", found " +
                                std::to_string(values.size()));
  }
  return values;
}

void write_values(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out.precision(17);
  for (double v : values) out << v << '\n';
}

void write_manifest(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open manifest file: " + path);
  out << doc.dump(2) << '\n';
}

// Shared quantization/transport flags.
struct CommFlags {
  std::uint32_t workers = 4;
  std::string scheme = "exponential";
  std::uint32_t s = 7;
  std::string norm = "linf";
  bool sparse = false;
  std::uint32_t width = 8;
  std::string topo = "tree";
  std::string transport = "inproc";
  std::uint64_t seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--workers", workers, "number of workers");
    cmd->add_option("--scheme", scheme, "level scheme: standard|exponential");
    cmd->add_option("--s", s, "number of quantization levels");
    cmd->add_option("--norm", norm, "global norm: linf, l2, or q,p orders");
    cmd->add_flag("--sparse", sparse, "allgather nonzeros instead of dense lanes");
    cmd->add_option("--width", width, "lane width in bits");
    cmd->add_option("--topo", topo, "allreduce topology: tree|ring");
    cmd->add_option("--transport", transport, "inproc|tcp");
    cmd->add_option("--seed", seed, "randomness seed");
  }

  GqsgdConfig to_config() const {
    GqsgdConfig cfg;
    cfg.workers = workers;
    cfg.scheme = level_kind_from_string(scheme);
    cfg.s = s;
    cfg.norm = norm_spec_from_string(norm);
    cfg.sparse = sparse;
    cfg.width_bits = width;
    cfg.topo = topology_from_string(topo);
    cfg.transport = transport_from_string(transport);
    cfg.seed = seed;
    return cfg;
  }

  json to_json() const {
    return json{{"workers", workers}, {"scheme", scheme},
                {"s", s},             {"norm", norm},
                {"sparse", sparse},   {"width", width},
                {"topo", topo},       {"transport", transport},
                {"seed", seed}};
  }
};

int cmd_quantize(const CommFlags& flags, const std::string& in,
                 std::uint32_t dim, std::uint32_t worker, std::uint64_t round,
                 const std::string& out) {
  const GqsgdConfig cfg = flags.to_config();
  std::vector<double> x;
  if (!in.empty()) {
    x = read_values(in, 0);
  } else {
    x = gaussian_shards(1, dim, cfg.seed).front();
  }
  const LevelScheme scheme = cfg.scheme == LevelKind::Standard
                                 ? LevelScheme::standard(cfg.s)
                                 : LevelScheme::exponential(cfg.s);
  const double stat = local_norm_stat(x, cfg.norm);
  const std::vector<double> one{stat};
  const double norm = combine_norm_stats(one, cfg.norm);
  const CounterRng rng(cfg.seed);
  const QuantizedShard shard = quantize_shard(x, norm, scheme, rng, worker, round);

  const std::uint32_t width = validate_level_width(cfg.width_bits, cfg.s);
  Payload payload;
  std::size_t nnz = 0;
  if (cfg.sparse) {
    const SparseShard sparse = to_sparse(shard, scheme);
    nnz = sparse.index.size();
    payload = serialize_sparse(sparse, width);
  } else {
    for (std::uint32_t idx : shard.level_idx) nnz += idx != cfg.s;
    payload = serialize_dense(shard, width);
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::invalid_argument("cannot open output file: " + out);
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));

  json manifest = {{"command", "quantize"},
                   {"params", flags.to_json()},
                   {"input", in.empty() ? json("<generated>") : json(in)},
                   {"dim", x.size()},
                   {"norm", norm},
                   {"nonzeros", nnz},
                   {"payload_bytes", payload.size()},
                   {"raw_f64_bytes", 8 * x.size()},
                   {"output", out}};
  write_manifest(out + ".manifest.json", manifest);
  std::printf("quantized %zu values: norm=%.6g nonzeros=%zu payload=%zu bytes -> %s\n",
              x.size(), norm, nnz, payload.size(), out.c_str());
  return 0;
}

int cmd_allreduce(const CommFlags& flags, const std::string& in,
                  std::uint32_t dim, std::uint64_t round, std::int32_t rank,
                  const std::string& listen, const std::string& peers_csv,
                  const std::string& out) {
  const GqsgdConfig cfg = flags.to_config();

  if (!peers_csv.empty()) {
    // Multi-process mode: this invocation is one rank of the mesh.
    std::vector<std::string> peers;
    std::stringstream ss(peers_csv);
    std::string item;
    while (std::getline(ss, item, ',')) peers.push_back(item);
    if (peers.size() != cfg.workers) {
      throw std::invalid_argument("--peers must list exactly --workers endpoints");
    }
    std::uint32_t my_rank;
    if (rank >= 0) {
      my_rank = static_cast<std::uint32_t>(rank);
    } else if (!listen.empty()) {
      const auto it = std::find(peers.begin(), peers.end(), listen);
      if (it == peers.end()) {
        throw std::invalid_argument("--listen endpoint not found in --peers");
      }
      my_rank = static_cast<std::uint32_t>(it - peers.begin());
    } else {
      throw std::invalid_argument("multi-process mode needs --rank or --listen");
    }
    if (my_rank >= cfg.workers) throw std::invalid_argument("rank out of range");

    std::vector<double> shard;
    if (!in.empty()) {
      shard = read_values(in, dim);
    } else {
      shard = gaussian_shards(cfg.workers, dim, cfg.seed)[my_rank];
    }
    PeerSockets mesh = connect_mesh(my_rank, peers);
    const WorkerMeanResult res = gqsgd_mean_worker(mesh, shard, cfg, round);
    double checksum = 0.0;
    for (double v : res.mean) checksum += v;
    std::printf("rank %u: norm=%.9g payload_sent=%llu bytes norm_sent=%llu bytes "
                "mean_sum=%.12g\n",
                my_rank, res.norm,
                static_cast<unsigned long long>(res.payload_bytes_sent),
                static_cast<unsigned long long>(res.norm_bytes_sent), checksum);
    if (!out.empty()) {
      write_values(out, res.mean);
      json manifest = {{"command", "allreduce"},
                       {"params", flags.to_json()},
                       {"rank", my_rank},
                       {"round", round},
                       {"norm", res.norm},
                       {"payload_bytes_sent", res.payload_bytes_sent},
                       {"norm_bytes_sent", res.norm_bytes_sent},
                       {"output", out}};
      write_manifest(out + ".manifest.json", manifest);
    }
    return 0;
  }

  std::vector<std::vector<double>> shards(cfg.workers);
  if (!in.empty()) {
    const std::vector<double> flat =
        read_values(in, std::size_t{cfg.workers} * dim);
    for (std::uint32_t r = 0; r < cfg.workers; ++r) {
      shards[r].assign(flat.begin() + std::size_t{r} * dim,
                       flat.begin() + std::size_t{r + 1} * dim);
    }
  } else {
    shards = gaussian_shards(cfg.workers, dim, cfg.seed);
  }

  const MeanResult res = gqsgd_mean(shards, cfg, round);
  const std::uint64_t payload_bytes = res.payload_traffic.total_bytes;
  const std::uint64_t norm_bytes = res.norm_traffic.total_bytes;
  // What an uncompressed f32 allreduce moves in total on either topology.
  const std::uint64_t f32_bytes =
      2ull * (cfg.workers - 1) * 4ull * shards.front().size();
  const double ratio =
      payload_bytes ? static_cast<double>(f32_bytes) / payload_bytes : 0.0;
  double checksum = 0.0;
  for (double v : res.mean()) checksum += v;

  std::printf("allreduce: workers=%u dim=%zu norm=%.9g lane_width=%u\n",
              cfg.workers, shards.front().size(), res.norm, res.lane_width_used);
  std::printf("traffic: payload=%llu bytes, norm=%llu bytes, f32 baseline=%llu "
              "bytes, compression=%.3fx\n",
              static_cast<unsigned long long>(payload_bytes),
              static_cast<unsigned long long>(norm_bytes),
              static_cast<unsigned long long>(f32_bytes), ratio);
  std::printf("mean_sum=%.12g (identical on all %u workers)\n", checksum,
              cfg.workers);

  if (!out.empty()) {
    write_values(out, res.mean());
    json manifest = {{"command", "allreduce"},
                     {"params", flags.to_json()},
                     {"dim", shards.front().size()},
                     {"round", round},
                     {"norm", res.norm},
                     {"lane_width", res.lane_width_used},
                     {"payload_bytes", payload_bytes},
                     {"norm_bytes", norm_bytes},
                     {"f32_baseline_bytes", f32_bytes},
                     {"compression_ratio", ratio},
                     {"output", out}};
    write_manifest(out + ".manifest.json", manifest);
  }
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::pair<std::string, std::string>>& flags,
              const std::vector<std::string>& overrides) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_train_config(config_path);
  for (const auto& [key, value] : flags) apply_config_pair(cfg, key, value);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got " + kv);
    }
    apply_config_pair(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }

  const RunResult res = run_experiment(cfg);
  std::printf("train: task=%s workers=%u dim=%u steps=%u compression=%s\n",
              to_string(cfg.task).c_str(), cfg.workers, cfg.dim, cfg.steps,
              to_string(cfg.compression).c_str());
  std::printf("eta=%.6g theta=%.6g final_loss=%.9g bytes=%llu\n", res.eta_used,
              res.theta_used, res.final_loss,
              static_cast<unsigned long long>(res.total_bytes));
  if (!cfg.out.empty()) {
    json manifest = {{"command", "train"},
                     {"config",
                      {{"task", to_string(cfg.task)},
                       {"workers", cfg.workers},
                       {"dim", cfg.dim},
                       {"samples", cfg.samples},
                       {"steps", cfg.steps},
                       {"eta", res.eta_used},
                       {"batch", cfg.batch},
                       {"hetero", cfg.hetero},
                       {"noise", cfg.noise},
                       {"lambda", cfg.lambda},
                       {"seed", cfg.seed},
                       {"compression", to_string(cfg.compression)},
                       {"scheme", to_string(cfg.comm.scheme)},
                       {"s", cfg.comm.s},
                       {"norm", to_string(cfg.comm.norm)},
                       {"sparse", cfg.comm.sparse},
                       {"width", cfg.comm.width_bits},
                       {"topo", to_string(cfg.comm.topo)},
                       {"transport", to_string(cfg.comm.transport)}}},
                     {"theta", res.theta_used},
                     {"final_loss", res.final_loss},
                     {"total_bytes", res.total_bytes},
                     {"records", res.records.size()},
                     {"output", cfg.out}};
    write_manifest(cfg.out + ".manifest.json", manifest);
    std::printf("trajectory -> %s\n", cfg.out.c_str());
  }
  return 0;
}

int cmd_perf(const CostParams& params, const std::string& out) {
  const Prediction pred = predict(params);
  std::printf("baseline:  %.9g s\n", pred.baseline);
  std::printf("quantized: %.9g s\n", pred.quantized);
  std::printf("speedup:   %.4fx (%s)\n", pred.speedup,
              pred.beats_baseline ? "quantization wins" : "baseline wins");
  if (pred.threshold.verdict == SpeedupVerdict::Threshold) {
    std::printf("verdict:   Threshold, wins while beta < %.6g bytes/s\n",
                pred.threshold.beta_max);
  } else {
    std::printf("verdict:   %s\n", to_string(pred.threshold.verdict).c_str());
  }
  if (!out.empty()) {
    json manifest = {{"command", "perf"},
                     {"params",
                      {{"alpha", params.alpha},
                       {"beta", params.beta},
                       {"gamma", params.gamma},
                       {"omega", params.omega},
                       {"rho", params.rho},
                       {"delta", params.delta},
                       {"workers", params.workers},
                       {"size", params.size}}},
                     {"baseline_s", pred.baseline},
                     {"quantized_s", pred.quantized},
                     {"speedup", pred.speedup},
                     {"beats_baseline", pred.beats_baseline},
                     {"verdict", to_string(pred.threshold.verdict)},
                     {"beta_max", pred.threshold.beta_max}};
    write_manifest(out, manifest);
  }
  return 0;
}

int cmd_verify(std::uint64_t seed, bool fast, const std::string& csv) {
  const auto results = run_verification({seed, fast});
  bool all_pass = true;
  for (const CheckResult& r : results) {
    std::printf("%s %-26s measured=%.6g limit=%.6g  %s\n",
                r.pass ? "PASS" : "FAIL", r.name.c_str(), r.measured, r.limit,
                r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  std::printf("%zu checks, %s\n", results.size(),
              all_pass ? "all passed" : "FAILURES present");
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) throw std::invalid_argument("cannot open csv file: " + csv);
    out.precision(17);
    out << "name,pass,measured,limit,detail\n";
    for (const CheckResult& r : results) {
      out << r.name << ',' << (r.pass ? 1 : 0) << ',' << r.measured << ','
          << r.limit << ",\"" << r.detail << "\"\n";
    }
  }
  return all_pass ? 0 : 1;
}

int cmd_bench(double mb, std::size_t dim, std::uint32_t iters, std::uint32_t s,
              std::uint32_t workers, std::uint32_t width) {
  if (dim == 0) dim = static_cast<std::size_t>(mb * (1 << 20) / 4.0);
  if (dim == 0) throw std::invalid_argument("payload too small for one element");

  const Schedule tree = tree_schedule(workers);
  const Schedule ring = ring_schedule(workers);
  std::printf("schedules at %u workers: tree %u steps, ring %u steps\n",
              workers, tree.steps, ring.steps);

  // Software throughput of the reduction inner loops on this machine,
  // reported relative to plain f32 summation (the omega inputs of the cost
  // model measure exactly this ratio on the target accelerator).
  const CounterRng rng(7);
  const ReduceContext ctx = ReduceContext::make(s, workers, width);
  const LevelScheme exp_scheme = LevelScheme::exponential(s);
  const LevelScheme std_scheme = LevelScheme::standard(s);
  const auto shards = gaussian_shards(2, dim, 11);
  const double norm = global_norm(shards, NormSpec{});
  const QuantizedShard qa = quantize_shard(shards[0], norm, exp_scheme, rng, 0, 0);
  const QuantizedShard qb = quantize_shard(shards[1], norm, exp_scheme, rng, 1, 0);

  Payload fa(4 * dim), fb(4 * dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const float a = static_cast<float>(shards[0][j]);
    const float b = static_cast<float>(shards[1][j]);
    std::memcpy(fa.data() + 4 * j, &a, 4);
    std::memcpy(fb.data() + 4 * j, &b, 4);
  }
  // Integer level lanes as the dense standard path encodes them: the level
  // index counted from zero, signed, 16-bit so the sum never overflows here.
  auto int_lanes = [&](std::uint32_t worker) {
    const QuantizedShard q =
        quantize_shard(shards[worker], norm, std_scheme, rng, worker, 1);
    Payload lanes(2 * dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const std::int16_t lane = static_cast<std::int16_t>(
          q.sign[j] * static_cast<std::int32_t>(s - q.level_idx[j]));
      std::memcpy(lanes.data() + 2 * j, &lane, 2);
    }
    return lanes;
  };
  Payload ia = int_lanes(0), ib = int_lanes(1);
  Payload ta = pack_tokens(tokens_from_shard(qa, ctx), width);
  Payload tb = pack_tokens(tokens_from_shard(qb, ctx), width);

  auto time_ops = [&](const PayloadOps& ops, Payload& acc, const Payload& in) {
    Payload scratch = acc;
    const auto start = std::chrono::steady_clock::now();
    for (std::uint32_t it = 0; it < iters; ++it) {
      scratch = acc;
      ops.combine(scratch, in, it, 0, 0, 0);
    }
    const auto stop = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count();
    return iters * static_cast<double>(dim) / seconds;  // elements per second
  };

  const double f32_rate = time_ops(F32SumOps{}, fa, fb);
  const double int_rate = time_ops(IntSumOps{16}, ia, ib);
  const double tok_rate = time_ops(TokenReduceOps{ctx, rng}, ta, tb);

  std::printf("reduction throughput over %zu elements (%.1f MB f32), %u iterations:\n",
              dim, 4.0 * dim / (1 << 20), iters);
  std::printf("  f32 sum:        %.4g elem/s\n", f32_rate);
  std::printf("  int level sum:  %.4g elem/s  (omega_standard ~ %.4g)\n",
              int_rate, int_rate / f32_rate);
  std::printf("  token reduce:   %.4g elem/s  (omega_exponential ~ %.4g)\n",
              tok_rate, tok_rate / f32_rate);

  // End-to-end wall time of one quantized mean on both transports, at a
  // size the loopback sockets handle quickly.
  const std::size_t tdim = std::min<std::size_t>(dim, 1 << 16);
  GqsgdConfig cfg;
  cfg.workers = workers;
  cfg.s = s;
  cfg.width_bits = width;
  const auto tshards = gaussian_shards(workers, tdim, 13);
  for (Transport tr : {Transport::Inproc, Transport::Tcp}) {
    cfg.transport = tr;
    const auto start = std::chrono::steady_clock::now();
    const MeanResult res = gqsgd_mean(tshards, cfg, 0);
    const auto stop = std::chrono::steady_clock::now();
    std::printf("  %s mean over %zu elements: %.3f ms, %llu payload bytes\n",
                to_string(tr).c_str(), tdim,
                1e3 * std::chrono::duration<double>(stop - start).count(),
                static_cast<unsigned long long>(res.payload_traffic.total_bytes));
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"globally normalized gradient quantization toolkit"};
  app.require_subcommand(1);

  // quantize
  auto* q = app.add_subcommand("quantize", "quantize one gradient vector");
  CommFlags q_flags;
  q_flags.attach(q);
  std::string q_in, q_out = "quantized.bin";
  std::uint32_t q_dim = 64, q_worker = 0;
  std::uint64_t q_round = 0;
  q->add_option("--in", q_in, "text file of f64 values (default: generated)");
  q->add_option("--dim", q_dim, "generated vector length");
  q->add_option("--worker", q_worker, "worker id for the dither keys");
  q->add_option("--round", q_round, "round id for the dither keys");
  q->add_option("--out", q_out, "payload output path");

  // allreduce
  auto* a = app.add_subcommand("allreduce", "quantized mean across workers");
  CommFlags a_flags;
  a_flags.attach(a);
  std::string a_in, a_out, a_listen, a_peers;
  std::uint32_t a_dim = 64;
  std::uint64_t a_round = 0;
  std::int32_t a_rank = -1;
  a->add_option("--in", a_in, "text file of workers*dim f64 values");
  a->add_option("--dim", a_dim, "shard length");
  a->add_option("--round", a_round, "aggregation round id");
  a->add_option("--rank", a_rank, "this process's rank (multi-process mode)");
  a->add_option("--listen", a_listen, "this process's endpoint (multi-process)");
  a->add_option("--peers", a_peers, "comma-separated host:port list, rank order");
  a->add_option("--out", a_out, "write the mean estimate here");

  // train
  auto* t = app.add_subcommand("train", "distributed SGD on a synthetic task");
  std::string t_config;
  std::vector<std::string> t_sets;
  t->add_option("--config", t_config, "key=value config file");
  t->add_option("--set", t_sets, "config overrides, key=value");
  // Direct flags for the common config keys; --set still wins.
  std::map<std::string, std::string> t_vals;
  std::vector<std::pair<std::string, std::string>> t_flags;
  for (const char* key :
       {"task", "workers", "dim", "samples", "steps", "eta", "batch", "hetero",
        "noise", "lambda", "seed", "compression", "scheme", "s", "norm",
        "width", "topo", "transport", "record_every", "out"}) {
    t->add_option("--" + std::string(key), t_vals[key]);
  }
  t->add_option("--n", t_vals["workers"], "alias for --workers");
  bool t_sparse = false;
  t->add_flag("--sparse", t_sparse);

  // perf
  auto* p = app.add_subcommand("perf", "allreduce cost model");
  CostParams p_params;
  std::string p_out;
  p->add_option("--alpha", p_params.alpha, "per-hop latency, s");
  p->add_option("--beta", p_params.beta, "link bandwidth, bytes/s");
  p->add_option("--gamma", p_params.gamma, "native reduction throughput, bytes/s");
  p->add_option("--omega", p_params.omega, "quantized reduction relative throughput");
  p->add_option("--rho", p_params.rho, "compression ratio");
  p->add_option("--delta", p_params.delta, "codec overhead, s per original byte");
  p->add_option("--workers", p_params.workers, "number of workers");
  p->add_option("--size", p_params.size, "payload bytes per worker");
  p->add_option("--out", p_out, "manifest output path");

  // verify
  auto* v = app.add_subcommand("verify", "run the built-in invariant suite");
  std::uint64_t v_seed = 1;
  bool v_fast = false, v_all = false;
  std::string v_csv;
  v->add_option("--seed", v_seed, "randomness seed");
  v->add_flag("--fast", v_fast, "smaller Monte Carlo budgets");
  v->add_flag("--all", v_all, "run every check (the default)");
  v->add_option("--csv", v_csv, "also write the table as CSV");

  // bench
  auto* b = app.add_subcommand("bench", "reduction throughput microbenchmark");
  double b_mb = 25.0;
  std::size_t b_dim = 0;
  std::uint32_t b_iters = 20, b_s = 7, b_workers = 16, b_width = 8;
  b->add_option("--mb", b_mb, "f32 payload size in MiB");
  b->add_option("--dim", b_dim, "elements per reduction (overrides --mb)");
  b->add_option("--iters", b_iters, "repetitions");
  b->add_option("--s", b_s, "levels for the token reduce");
  b->add_option("--workers", b_workers, "worker count for the token reduce");
  b->add_option("--width", b_width, "token lane width in bits");

  try {
    app.parse(argc, argv);
    if (*q) return cmd_quantize(q_flags, q_in, q_dim, q_worker, q_round, q_out);
    if (*a) return cmd_allreduce(a_flags, a_in, a_dim, a_round, a_rank,
                                 a_listen, a_peers, a_out);
    if (*t) {
      for (const auto& [key, value] : t_vals) {
        if (t->count("--" + key)) t_flags.emplace_back(key, value);
      }
      if (t->count("--n")) t_flags.emplace_back("workers", t_vals["workers"]);
      if (t_sparse) t_flags.emplace_back("sparse", "1");
      return cmd_train(t_config, t_flags, t_sets);
    }
    if (*p) return cmd_perf(p_params, p_out);
    if (*v) return cmd_verify(v_seed, v_fast, v_csv);
    if (*b) return cmd_bench(b_mb, b_dim, b_iters, b_s, b_workers, b_width);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace gqsgd
