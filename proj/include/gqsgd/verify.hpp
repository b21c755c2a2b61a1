#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gqsgd/algorithm.hpp"
#include "gqsgd/levels.hpp"
#include "gqsgd/norms.hpp"

namespace gqsgd {

// Variance coefficient theta of the quantized-mean estimator:
// E||estimate - mean||^2 <= (theta / n) ||inputs||^2, with the bound
//   standard:     sqrt(d) / (sqrt(n) s)            for s <= sqrt(n d)
//   exponential:  1/(8n) + sqrt(d) / (sqrt(n) 2^(s-1))
//                                                  for s <= 1 + log2(sqrt(n d))
double theta_bound(LevelKind kind, std::uint32_t s, std::uint32_t n,
                   std::size_t d);
bool theta_bound_applies(LevelKind kind, std::uint32_t s, std::uint32_t n,
                         std::size_t d);

// Expected total nonzeros across all n shards after quantization.
// The stated bound is s^2 + sqrt(n d) (standard) and 2^(2s-2) + sqrt(n d)
// (exponential); the corrected bound carries the slope of the bottom
// quantization segment on the sqrt(n d) term and holds for every s.
double sparsity_bound_stated(LevelKind kind, std::uint32_t s, std::uint32_t n,
                             std::size_t d);
double sparsity_bound_corrected(LevelKind kind, std::uint32_t s,
                                std::uint32_t n, std::size_t d);

// Closed forms for a concrete set of shards under exact-sum aggregation of
// one quantization round (no aggregation rounding). All three are exact
// expectations over the dither draws, no Monte Carlo involved.
double exact_deviation_moment(const std::vector<std::vector<double>>& shards,
                              const LevelScheme& scheme, const NormSpec& norm);
double exact_theta_hat(const std::vector<std::vector<double>>& shards,
                       const LevelScheme& scheme, const NormSpec& norm);
double exact_expected_nnz(const std::vector<std::vector<double>>& shards,
                          const LevelScheme& scheme, const NormSpec& norm);
// E||estimate - mean||^2 / ||mean||^2 for the exact-aggregation estimator.
double exact_compression_error(const std::vector<std::vector<double>>& shards,
                               const LevelScheme& scheme, const NormSpec& norm);

// Gaussian test shards keyed by (seed, worker, element).
std::vector<std::vector<double>> gaussian_shards(std::uint32_t n, std::size_t d,
                                                 std::uint64_t seed);

// Monte Carlo deviation statistics of the full pipeline: runs gqsgd_mean
// for rounds base_round .. base_round + trials - 1 and accumulates the
// deviation from the exact f64 mean.
struct DeviationStats {
  std::vector<double> mean_dev;      // per-coordinate average deviation
  std::vector<double> se;            // standard error of each average
  double second_moment = 0.0;        // E||estimate - mean||^2
  double mean_norm2 = 0.0;           // ||mean||^2
  std::uint64_t trials = 0;
};

DeviationStats mc_deviation(const std::vector<std::vector<double>>& shards,
                            const GqsgdConfig& cfg, std::uint64_t trials,
                            std::uint64_t base_round = 0);

// One named check with its measured value and the value it is held against.
struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  bool fast = false;  // smaller Monte Carlo budgets
};

// The built-in invariant suite behind the `verify` CLI subcommand: rounding
// unbiasedness, variance and sparsity bounds, token-arithmetic identities,
// aggregation inflation, width admission, transport agreement, and the
// cost-model threshold consistency.
std::vector<CheckResult> run_verification(const VerifyOptions& opts);

}  // namespace gqsgd
