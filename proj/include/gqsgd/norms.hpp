#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gqsgd {

// Norm orders used for the global scale. INF encodes the infinity order for
// both the per-shard norm q and the cross-shard combination p.
inline constexpr std::uint32_t kNormInf = 0xffffffffu;

struct NormSpec {
  std::uint32_t q = kNormInf;  // per-shard vector norm order
  std::uint32_t p = kNormInf;  // combination order across shards

  bool operator==(const NormSpec&) const = default;
};

std::string to_string(const NormSpec& spec);
NormSpec norm_spec_from_string(const std::string& text);  // "inf,inf" / "2,2"

// Per-shard statistic that combines across workers by sum (finite p) or max
// (p = inf): returns ||x||_q^p, with the p = inf convention ||x||_q.
// Rejects NaN/Inf entries.
double local_norm_stat(std::span<const double> x, const NormSpec& spec);

// Fold per-worker statistics into the global scale
// (sum stats)^(1/p) for finite p, max for p = inf.
double combine_norm_stats(std::span<const double> stats, const NormSpec& spec);

// Convenience: the global scale of a full set of shards.
double global_norm(const std::vector<std::vector<double>>& shards,
                   const NormSpec& spec);

}  // namespace gqsgd
