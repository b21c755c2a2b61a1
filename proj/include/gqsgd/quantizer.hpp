#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gqsgd/levels.hpp"
#include "gqsgd/norms.hpp"
#include "gqsgd/rng.hpp"

namespace gqsgd {

// One worker's quantized gradient: the shared global scale, a sign per
// element, and the level index per element. Index s is the zero level, and
// its sign is canonically +1 so equal shards encode to equal bytes.
struct QuantizedShard {
  double norm = 0.0;
  std::vector<std::int8_t> sign;        // +1 / -1
  std::vector<std::uint32_t> level_idx; // 0..s

  std::size_t size() const { return sign.size(); }
};

// Same content with the zero levels dropped; indices strictly increasing.
struct SparseShard {
  double norm = 0.0;
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> index;
  std::vector<std::int8_t> sign;
  std::vector<std::uint32_t> level_idx; // 0..s-1, never the zero level
};

// Stochastically round x / norm onto the grid. The dither draw for element j
// is keyed by (worker, round, j), so every process that knows the seed
// reproduces the same quantization. Preconditions: norm > 0 unless x is all
// zeros, and |x_j| <= norm for every element (guaranteed when the scale is a
// global norm with q = inf or q >= 1 over a superset of x).
QuantizedShard quantize_shard(std::span<const double> x, double norm,
                              const LevelScheme& scheme, const CounterRng& rng,
                              std::uint32_t worker, std::uint64_t round);

// norm * sign * level, the value the shard represents.
std::vector<double> decode_shard(const QuantizedShard& shard,
                                 const LevelScheme& scheme);

SparseShard to_sparse(const QuantizedShard& shard, const LevelScheme& scheme);
QuantizedShard from_sparse(const SparseShard& sparse, const LevelScheme& scheme);

// Sum of norm * sign * level over a set of sparse shards, accumulated in
// rank order so every caller produces identical bits.
std::vector<double> accumulate_sparse(const std::vector<SparseShard>& shards,
                                      const LevelScheme& scheme);

}  // namespace gqsgd
