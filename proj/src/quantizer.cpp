#include "gqsgd/quantizer.hpp"

#include <cmath>
#include <stdexcept>

namespace gqsgd {

QuantizedShard quantize_shard(std::span<const double> x, double norm,
                              const LevelScheme& scheme, const CounterRng& rng,
                              std::uint32_t worker, std::uint64_t round) {
  if (!std::isfinite(norm) || norm < 0.0) {
    throw std::invalid_argument("scale must be finite and nonnegative");
  }
  QuantizedShard out;
  out.norm = norm;
  out.sign.resize(x.size());
  out.level_idx.resize(x.size());
  const std::uint32_t s = scheme.s();

  if (norm == 0.0) {
    for (double v : x) {
      if (v != 0.0) {
        throw std::invalid_argument("zero scale with nonzero gradient");
      }
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
      out.sign[j] = 1;
      out.level_idx[j] = s;
    }
    return out;
  }

  for (std::size_t j = 0; j < x.size(); ++j) {
    const double v = x[j];
    if (!std::isfinite(v)) {
      throw std::invalid_argument("gradient contains NaN or Inf");
    }
    const double y = std::fabs(v) / norm;
    if (y > 1.0) {
      throw std::invalid_argument("element magnitude exceeds the scale");
    }
    const double u = rng.u01(RngStream::Dither, worker, round, j);
    const std::uint32_t idx = scheme.random_round(y, u);
    out.level_idx[j] = idx;
    out.sign[j] = (idx == s) ? std::int8_t{1} : (v < 0.0 ? std::int8_t{-1} : std::int8_t{1});
  }
  return out;
}

std::vector<double> decode_shard(const QuantizedShard& shard,
                                 const LevelScheme& scheme) {
  std::vector<double> out(shard.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = shard.norm * shard.sign[j] * scheme.level(shard.level_idx[j]);
  }
  return out;
}

SparseShard to_sparse(const QuantizedShard& shard, const LevelScheme& scheme) {
  const std::uint32_t s = scheme.s();
  SparseShard out;
  out.norm = shard.norm;
  out.dim = static_cast<std::uint32_t>(shard.size());
  for (std::uint32_t j = 0; j < out.dim; ++j) {
    if (shard.level_idx[j] == s) continue;
    out.index.push_back(j);
    out.sign.push_back(shard.sign[j]);
    out.level_idx.push_back(shard.level_idx[j]);
  }
  return out;
}

QuantizedShard from_sparse(const SparseShard& sparse, const LevelScheme& scheme) {
  const std::uint32_t s = scheme.s();
  QuantizedShard out;
  out.norm = sparse.norm;
  out.sign.assign(sparse.dim, 1);
  out.level_idx.assign(sparse.dim, s);
  std::uint32_t prev = 0;
  bool first = true;
  for (std::size_t k = 0; k < sparse.index.size(); ++k) {
    const std::uint32_t j = sparse.index[k];
    if (j >= sparse.dim || (!first && j <= prev)) {
      throw std::domain_error("sparse indices must be strictly increasing and in range");
    }
    if (sparse.level_idx[k] >= s) {
      throw std::domain_error("sparse entry carries the zero level");
    }
    out.sign[j] = sparse.sign[k];
    out.level_idx[j] = sparse.level_idx[k];
    prev = j;
    first = false;
  }
  return out;
}

std::vector<double> accumulate_sparse(const std::vector<SparseShard>& shards,
                                      const LevelScheme& scheme) {
  if (shards.empty()) return {};
  std::vector<double> acc(shards.front().dim, 0.0);
  for (const auto& sh : shards) {
    if (sh.dim != acc.size()) {
      throw std::invalid_argument("shard dimensions disagree");
    }
    for (std::size_t k = 0; k < sh.index.size(); ++k) {
      acc[sh.index[k]] += sh.norm * sh.sign[k] * scheme.level(sh.level_idx[k]);
    }
  }
  return acc;
}

}  // namespace gqsgd
