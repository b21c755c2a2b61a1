#include "gqsgd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gqsgd/exp_arith.hpp"
#include "gqsgd/perf_model.hpp"
#include "gqsgd/quantizer.hpp"
#include "gqsgd/rng.hpp"

namespace gqsgd {

double theta_bound(LevelKind kind, std::uint32_t s, std::uint32_t n,
                   std::size_t d) {
  const double sd = std::sqrt(static_cast<double>(d));
  const double sn = std::sqrt(static_cast<double>(n));
  switch (kind) {
    case LevelKind::Standard:
      return sd / (sn * s);
    case LevelKind::Exponential:
      return 1.0 / (8.0 * n) + sd / (sn * std::ldexp(1.0, static_cast<int>(s) - 1));
    case LevelKind::Custom:
      break;
  }
  throw std::invalid_argument("no variance bound for custom grids");
}

bool theta_bound_applies(LevelKind kind, std::uint32_t s, std::uint32_t n,
                         std::size_t d) {
  const double nd = static_cast<double>(n) * static_cast<double>(d);
  switch (kind) {
    case LevelKind::Standard:
      return s <= std::sqrt(nd);
    case LevelKind::Exponential:
      return s <= 1.0 + std::log2(std::sqrt(nd));
    case LevelKind::Custom:
      return false;
  }
  return false;
}

double sparsity_bound_stated(LevelKind kind, std::uint32_t s, std::uint32_t n,
                             std::size_t d) {
  const double snd = std::sqrt(static_cast<double>(n) * static_cast<double>(d));
  if (kind == LevelKind::Standard) return static_cast<double>(s) * s + snd;
  if (kind == LevelKind::Exponential) {
    return std::ldexp(1.0, 2 * static_cast<int>(s) - 2) + snd;
  }
  throw std::invalid_argument("no sparsity bound for custom grids");
}

double sparsity_bound_corrected(LevelKind kind, std::uint32_t s,
                                std::uint32_t n, std::size_t d) {
  const double snd = std::sqrt(static_cast<double>(n) * static_cast<double>(d));
  if (kind == LevelKind::Standard) {
    return static_cast<double>(s) * s + static_cast<double>(s) * snd;
  }
  if (kind == LevelKind::Exponential) {
    const double slope = std::ldexp(1.0, static_cast<int>(s) - 1);
    return std::ldexp(1.0, 2 * static_cast<int>(s) - 2) + slope * snd;
  }
  throw std::invalid_argument("no sparsity bound for custom grids");
}

double exact_deviation_moment(const std::vector<std::vector<double>>& shards,
                              const LevelScheme& scheme, const NormSpec& norm) {
  const double scale = global_norm(shards, norm);
  if (scale == 0.0) return 0.0;
  const double n = static_cast<double>(shards.size());
  double total = 0.0;
  for (const auto& x : shards) {
    for (double v : x) {
      total += scheme.round_variance(std::fabs(v) / scale);
    }
  }
  return scale * scale / (n * n) * total;
}

double exact_theta_hat(const std::vector<std::vector<double>>& shards,
                       const LevelScheme& scheme, const NormSpec& norm) {
  const double scale = global_norm(shards, norm);
  if (scale == 0.0) return 0.0;
  return static_cast<double>(shards.size()) *
         exact_deviation_moment(shards, scheme, norm) / (scale * scale);
}

double exact_expected_nnz(const std::vector<std::vector<double>>& shards,
                          const LevelScheme& scheme, const NormSpec& norm) {
  const double scale = global_norm(shards, norm);
  if (scale == 0.0) return 0.0;
  double total = 0.0;
  for (const auto& x : shards) {
    for (double v : x) {
      total += scheme.nonzero_probability(std::fabs(v) / scale);
    }
  }
  return total;
}

double exact_compression_error(const std::vector<std::vector<double>>& shards,
                               const LevelScheme& scheme, const NormSpec& norm) {
  const double moment = exact_deviation_moment(shards, scheme, norm);
  double mean_norm2 = 0.0;
  const std::size_t d = shards.front().size();
  const double n = static_cast<double>(shards.size());
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (const auto& x : shards) m += x[j];
    mean_norm2 += (m / n) * (m / n);
  }
  if (mean_norm2 == 0.0) {
    throw std::invalid_argument("mean gradient vanishes; the ratio is undefined");
  }
  return moment / mean_norm2;
}

std::vector<std::vector<double>> gaussian_shards(std::uint32_t n, std::size_t d,
                                                 std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<std::vector<double>> shards(n, std::vector<double>(d));
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      shards[i][j] = rng.normal(RngStream::ShardGen, i, j, 0);
    }
  }
  return shards;
}

DeviationStats mc_deviation(const std::vector<std::vector<double>>& shards,
                            const GqsgdConfig& cfg, std::uint64_t trials,
                            std::uint64_t base_round) {
  const std::size_t d = shards.front().size();
  const double n = static_cast<double>(shards.size());
  std::vector<double> exact_mean(d, 0.0);
  for (const auto& x : shards) {
    for (std::size_t j = 0; j < d; ++j) exact_mean[j] += x[j] / n;
  }

  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  double moment = 0.0, mean_norm2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) mean_norm2 += exact_mean[j] * exact_mean[j];

  for (std::uint64_t t = 0; t < trials; ++t) {
    const MeanResult res = gqsgd_mean(shards, cfg, base_round + t);
    const std::vector<double>& est = res.mean();
    double dev2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = est[j] - exact_mean[j];
      sum[j] += dev;
      sumsq[j] += dev * dev;
      dev2 += dev * dev;
    }
    moment += dev2;
  }

  DeviationStats stats;
  stats.trials = trials;
  stats.mean_dev.resize(d);
  stats.se.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    stats.mean_dev[j] = sum[j] / trials;
    const double var =
        std::max(0.0, sumsq[j] / trials - stats.mean_dev[j] * stats.mean_dev[j]);
    stats.se[j] = std::sqrt(var / trials);
  }
  stats.second_moment = moment / trials;
  stats.mean_norm2 = mean_norm2;
  return stats;
}

namespace {

void add(std::vector<CheckResult>& out, const std::string& name, bool pass,
         double measured, double limit, const std::string& detail = "") {
  out.push_back({name, pass, measured, limit, detail});
}

// Exact expectation of reduce_pair over the truncated geometric k, in units
// of 2^-max_e. Enumerates P(k = j) = 2^-j (j < m) and P(k = m) = 2^(1-m).
double reduce_pair_expectation(const ExpToken& a, const ExpToken& b,
                               const ReduceContext& ctx) {
  double e = 0.0;
  for (std::uint32_t j = 1; j <= ctx.m; ++j) {
    const double pj = j < ctx.m ? std::ldexp(1.0, -static_cast<int>(j))
                                : std::ldexp(1.0, 1 - static_cast<int>(ctx.m));
    e += pj * token_value(reduce_pair(a, b, j, ctx));
  }
  return e;
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  const CounterRng rng(opts.seed);
  const std::uint64_t scale = opts.fast ? 1 : 10;

  // Stochastic rounding is unbiased and matches its closed-form variance.
  {
    const std::uint64_t trials = 20000 * scale;
    double worst_bias = 0.0, worst_var_gap = 0.0;
    double bias_limit = 0.0, var_limit = 0.0;
    int cfg_id = 0;
    for (const auto& scheme :
         {LevelScheme::standard(4), LevelScheme::exponential(5)}) {
      for (double y : {0.03, 0.2, 1.0 / 3.0, 0.5, 0.77}) {
        double sum = 0.0, sumsq = 0.0;
        for (std::uint64_t t = 0; t < trials; ++t) {
          const double u = rng.u01(RngStream::ShardGen, 900 + cfg_id, t, 0);
          const double v = scheme.level(scheme.random_round(y, u));
          sum += v;
          sumsq += v * v;
        }
        const double mean = sum / trials;
        const double var = std::max(0.0, sumsq / trials - mean * mean);
        const double se = std::sqrt(var / trials);
        worst_bias = std::max(worst_bias, std::fabs(mean - y) - 4.0 * se);
        const double vref = scheme.round_variance(y);
        const double vse = vref * std::sqrt(2.0 / trials) + 1e-12;
        worst_var_gap = std::max(worst_var_gap, std::fabs(var - vref) - 6.0 * vse);
        bias_limit = std::max(bias_limit, 4.0 * se);
        var_limit = std::max(var_limit, 6.0 * vse);
        ++cfg_id;
      }
    }
    add(out, "dither-unbiased", worst_bias <= 0.0, worst_bias, 0.0,
        "max (|bias| - 4 SE) over the grid");
    add(out, "dither-variance", worst_var_gap <= 0.0, worst_var_gap, 0.0,
        "max (|var gap| - 6 SE) over the grid");
  }

  // Exact estimator variance sits under the bound wherever it applies.
  {
    double worst = 0.0;
    for (LevelKind kind : {LevelKind::Standard, LevelKind::Exponential}) {
      for (std::uint32_t n : {2u, 4u, 16u}) {
        for (std::size_t d : {16u, 256u}) {
          const std::uint32_t s_max = kind == LevelKind::Standard ? 8 : 5;
          for (std::uint32_t s = 1; s <= s_max; ++s) {
            if (!theta_bound_applies(kind, s, n, d)) continue;
            const auto scheme = kind == LevelKind::Standard
                                    ? LevelScheme::standard(s)
                                    : LevelScheme::exponential(s);
            const auto shards = gaussian_shards(n, d, opts.seed + s + n + d);
            // The coefficient bounds n E||G - mean||^2 relative to the
            // summed squared shard norms, i.e. the q = p = 2 scale.
            const double hat = exact_theta_hat(shards, scheme, NormSpec{2, 2});
            worst = std::max(worst, hat / theta_bound(kind, s, n, d));
          }
        }
      }
    }
    add(out, "variance-bound", worst <= 1.0, worst, 1.0,
        "max exact theta / bound over the grid");
  }

  // Averaging n independent local-norm compressors, each with relative
  // variance omega, yields a distributed mean estimator with theta = omega/n.
  {
    const std::uint32_t n = 4;
    const std::size_t d = 32;
    const auto scheme = LevelScheme::standard(1);
    const auto shards = gaussian_shards(n, d, opts.seed + 92);
    std::vector<double> lscale(n);
    double omega = 0.0, xx2 = 0.0, avg_moment = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      double ss = 0.0;
      for (double v : shards[i]) ss += v * v;
      lscale[i] = std::sqrt(ss);
      double vsum = 0.0;
      for (double v : shards[i]) {
        vsum += scheme.round_variance(std::fabs(v) / lscale[i]);
      }
      omega = std::max(omega, vsum);  // moment_i / ||x_i||^2 at an l2 scale
      xx2 += ss;
      avg_moment += ss * vsum / (n * n);
    }
    const double limit = omega / (n * static_cast<double>(n)) * xx2;

    const CounterRng lrng(opts.seed + 7);
    const std::uint64_t trials = opts.fast ? 4000 : 20000;
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      double dev2 = 0.0;
      std::vector<double> est(d, 0.0);
      for (std::uint32_t i = 0; i < n; ++i) {
        const auto q = quantize_shard(shards[i], lscale[i], scheme, lrng, i, t);
        const auto val = decode_shard(q, scheme);
        for (std::size_t j = 0; j < d; ++j) est[j] += val[j] / n;
      }
      for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::uint32_t i = 0; i < n; ++i) m += shards[i][j] / n;
        const double dev = est[j] - m;
        dev2 += dev * dev;
      }
      sum += dev2;
      sumsq += dev2 * dev2;
    }
    const double mc = sum / trials;
    const double se = std::sqrt(
        std::max(0.0, sumsq / trials - mc * mc) / static_cast<double>(trials));
    const bool pass = avg_moment <= limit * (1.0 + 1e-12) && mc <= limit + 4.0 * se;
    add(out, "averaging-variance", pass, mc, limit + 4.0 * se,
        "averaged local-norm compressors obey the theta = omega/n class bound");
  }

  // Expected nonzero counts against both sparsity bounds.
  {
    double worst_corrected = 0.0;
    const NormSpec l2{2, 2};
    for (LevelKind kind : {LevelKind::Standard, LevelKind::Exponential}) {
      for (std::uint32_t n : {2u, 4u, 8u}) {
        for (std::size_t d : {16u, 64u, 256u}) {
          for (std::uint32_t s : {1u, 2u, 4u, 7u}) {
            const auto scheme = kind == LevelKind::Standard
                                    ? LevelScheme::standard(s)
                                    : LevelScheme::exponential(s);
            const auto shards = gaussian_shards(n, d, opts.seed + 31 * s + n + d);
            const double nnz = exact_expected_nnz(shards, scheme, l2);
            worst_corrected =
                std::max(worst_corrected,
                         nnz / sparsity_bound_corrected(kind, s, n, d));
          }
        }
      }
    }
    add(out, "sparsity-corrected-bound", worst_corrected <= 1.0, worst_corrected,
        1.0, "max exact E[nnz] / corrected bound");

    double worst_stated = 0.0;
    for (std::uint32_t n : {2u, 4u, 8u}) {
      for (std::size_t d : {16u, 64u}) {
        const auto shards = gaussian_shards(n, d, opts.seed + n + d);
        // s = 1 for both grids, plus exponential s where 2^(2s-2) dominates.
        for (LevelKind kind : {LevelKind::Standard, LevelKind::Exponential}) {
          const auto s1 = kind == LevelKind::Standard ? LevelScheme::standard(1)
                                                      : LevelScheme::exponential(1);
          worst_stated = std::max(
              worst_stated, exact_expected_nnz(shards, s1, l2) /
                                sparsity_bound_stated(kind, 1, n, d));
        }
        worst_stated = std::max(
            worst_stated,
            exact_expected_nnz(shards, LevelScheme::exponential(6), l2) /
                sparsity_bound_stated(LevelKind::Exponential, 6, n, d));
      }
    }
    add(out, "sparsity-stated-bound", worst_stated <= 1.0, worst_stated, 1.0,
        "configurations where the stated constant holds");
  }

  // Token arithmetic: exact expectations of the pairwise reduction.
  {
    const ReduceContext ctx = ReduceContext::make(7, 16, 8);
    double worst = 0.0;
    // Exhaustive over the exponent range with the gap within the k support.
    // Same-sign pairs at e = 1 are excluded: two magnitudes of 1/2 cannot
    // both occur under the prescale budget, and the arithmetic rejects them.
    for (std::uint32_t e1 = 1; e1 <= 12; ++e1) {
      for (std::uint32_t e2 = 1; e2 <= 12; ++e2) {
        if ((e1 > e2 ? e1 - e2 : e2 - e1) > ctx.m - 1) continue;
        for (int s1 : {1, -1}) {
          for (int s2 : {1, -1}) {
            if (s1 == s2 && (e1 == 1 || e2 == 1)) continue;
            const ExpToken a{static_cast<std::int8_t>(s1), e1};
            const ExpToken b{static_cast<std::int8_t>(s2), e2};
            const double want = token_value(a) + token_value(b);
            const double got = reduce_pair_expectation(a, b, ctx);
            worst = std::max(worst, std::fabs(got - want));
          }
        }
      }
    }
    // Zero handling and cancellation are exact.
    const ExpToken zero{};
    worst = std::max(worst, std::fabs(reduce_pair_expectation(zero, {1, 5}, ctx) -
                                      token_value(ExpToken{1, 5})));
    worst = std::max(
        worst, std::fabs(reduce_pair_expectation({1, 4}, {-1, 4}, ctx)));
    add(out, "token-reduce-unbiased", worst <= 1e-15, worst, 1e-15,
        "max |E[reduce] - exact sum| over token pairs");
  }

  // Power-of-two rounding inflates second moments by at most 9/8.
  {
    double worst = 0.0;
    for (int i = 1; i <= 400; ++i) {
      const double y = 0.5 + 0.5 * i / 401.0;  // one octave is enough
      const int b = std::ilogb(y);
      const double lo = std::ldexp(1.0, b);
      const double p_up = y / lo - 1.0;
      const double second = (1.0 - p_up) * lo * lo + p_up * 4.0 * lo * lo;
      worst = std::max(worst, second / (y * y));
    }
    add(out, "rounding-second-moment", worst <= 9.0 / 8.0 + 1e-12, worst,
        9.0 / 8.0, "max E[C(y)^2] / y^2 over an octave");
  }

  // Width admission worked cases.
  {
    const bool pass = check_width(LevelKind::Exponential, 3, 16, 4) &&
                      !check_width(LevelKind::Exponential, 4, 16, 4) &&
                      check_width(LevelKind::Standard, 7, 16, 8) &&
                      !check_width(LevelKind::Standard, 255, 16, 8) &&
                      check_width(LevelKind::Exponential, 123, 16, 8) &&
                      !check_width(LevelKind::Exponential, 124, 16, 8);
    bool refused = false;
    try {
      ReduceContext::make(124, 16, 8);
    } catch (const std::invalid_argument&) {
      refused = true;
    }
    add(out, "width-admission", pass && refused, pass && refused ? 1.0 : 0.0,
        1.0, "boundary admissions and the refusal path");
  }

  // Both transports produce identical bytes.
  {
    bool agree = true;
    for (int variant = 0; variant < 3; ++variant) {
      GqsgdConfig cfg;
      cfg.workers = 4;
      cfg.seed = opts.seed + variant;
      cfg.scheme = variant == 1 ? LevelKind::Standard : LevelKind::Exponential;
      cfg.s = variant == 1 ? 15 : 7;
      cfg.sparse = variant == 2;
      cfg.topo = variant == 0 ? TopologyKind::Ring : TopologyKind::Tree;
      const auto shards = gaussian_shards(cfg.workers, 33, opts.seed + 70 + variant);
      cfg.transport = Transport::Inproc;
      const MeanResult a = gqsgd_mean(shards, cfg, 5);
      cfg.transport = Transport::Tcp;
      const MeanResult b = gqsgd_mean(shards, cfg, 5);
      for (std::uint32_t r = 0; r < cfg.workers; ++r) {
        agree = agree && a.per_worker[r] == b.per_worker[r];
      }
      agree = agree && a.per_worker[0] == a.per_worker[1];
    }
    add(out, "transport-agreement", agree, agree ? 1.0 : 0.0, 1.0,
        "inproc and tcp decode to identical bits");
  }

  // Full-pipeline estimator is unbiased. n = 2 keeps every reduction gap
  // within the k support, so the tree adds no truncation bias at all.
  {
    GqsgdConfig cfg;
    cfg.workers = 2;
    cfg.scheme = LevelKind::Exponential;
    cfg.s = 7;
    cfg.seed = opts.seed + 5;
    const auto shards = gaussian_shards(2, 24, opts.seed + 90);
    const auto stats = mc_deviation(shards, cfg, opts.fast ? 4000 : 20000);
    double worst = 0.0;
    for (std::size_t j = 0; j < stats.mean_dev.size(); ++j) {
      worst = std::max(worst,
                       std::fabs(stats.mean_dev[j]) - 4.0 * stats.se[j] - 1e-12);
    }
    add(out, "estimator-unbiased", worst <= 0.0, worst, 0.0,
        "max (|bias| - 4 SE) per coordinate, dense exponential path");
  }

  // In-network aggregation inflates the output second moment by at most
  // (9/8)^log2(n) relative to quantize-once-sum-exactly.
  {
    GqsgdConfig tree_cfg;
    tree_cfg.workers = 16;
    tree_cfg.scheme = LevelKind::Exponential;
    tree_cfg.s = 7;
    tree_cfg.seed = opts.seed + 6;
    GqsgdConfig exact_cfg = tree_cfg;
    exact_cfg.sparse = true;
    const auto shards = gaussian_shards(16, 32, opts.seed + 91);
    const std::uint64_t trials = opts.fast ? 2000 : 8000;
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const MeanResult tr = gqsgd_mean(shards, tree_cfg, t);
      const MeanResult ex = gqsgd_mean(shards, exact_cfg, t);
      double x = 0.0, y = 0.0;
      for (std::size_t j = 0; j < tr.mean().size(); ++j) {
        x += tr.mean()[j] * tr.mean()[j];
        y += ex.mean()[j] * ex.mean()[j];
      }
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const double mx = sx / trials, my = sy / trials;
    const double vx = sxx / trials - mx * mx, vy = syy / trials - my * my;
    const double cxy = sxy / trials - mx * my;
    const double ratio = mx / my;
    const double se =
        std::sqrt(std::max(0.0, vx / (my * my) +
                                    mx * mx * vy / (my * my * my * my) -
                                    2.0 * mx * cxy / (my * my * my)) /
                  trials);
    const double limit = std::pow(9.0 / 8.0, 4.0);
    add(out, "aggregation-inflation", ratio + 4.0 * se <= limit, ratio + 4.0 * se,
        limit, "tree / exact-sum output second-moment ratio at n = 16");
  }

  // Cost-model threshold agrees with brute-force cost comparison.
  {
    const std::uint64_t draws = opts.fast ? 500 : 5000;
    bool consistent = true;
    for (std::uint64_t t = 0; t < draws && consistent; ++t) {
      CostParams p;
      p.alpha = 0.0;
      p.omega = 0.02 + 0.98 * rng.u01(RngStream::ShardGen, 800, t, 0);
      p.rho = 1.0 + 63.0 * rng.u01(RngStream::ShardGen, 800, t, 1);
      p.gamma = 1e9 * (1.0 + 999.0 * rng.u01(RngStream::ShardGen, 800, t, 2));
      p.workers = 2 + static_cast<std::uint32_t>(
                          62 * rng.u01(RngStream::ShardGen, 800, t, 3));
      p.size = 1e6;
      const SpeedupThreshold th = speedup_threshold(p.omega, p.rho, p.gamma);
      if (th.verdict == SpeedupVerdict::Always) {
        p.beta = 1e9 * (1.0 + 1e5 * rng.u01(RngStream::ShardGen, 800, t, 4));
        consistent = quantized_cost(p) < baseline_cost(p);
      } else if (th.verdict == SpeedupVerdict::Threshold) {
        p.beta = th.beta_max * 0.999;
        consistent = quantized_cost(p) < baseline_cost(p);
        p.beta = th.beta_max * 1.001;
        consistent = consistent && quantized_cost(p) >= baseline_cost(p);
      }
    }
    add(out, "threshold-consistency", consistent, consistent ? 1.0 : 0.0, 1.0,
        "verdicts match brute-force cost comparison");
  }

  return out;
}

}  // namespace gqsgd
