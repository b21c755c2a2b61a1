#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gqsgd/quantizer.hpp"

namespace gqsgd {

using Payload = std::vector<std::byte>;

// Shard wire formats, little-endian throughout. Level lanes are w/8 bytes
// each for w in {8, 16, 32}; w must cover the scheme's largest index s.
//
// dense:  [norm f64][dim u32][sign bitmap ceil(dim/8)][levels dim * w/8]
// sparse: [norm f64][dim u32][nnz u32][index nnz * u32]
//         [sign bitmap ceil(nnz/8)][levels nnz * w/8]
//
// A set sign bit means negative. Structural problems on decode (truncated
// buffer, trailing bytes, nnz > dim, non-increasing indices) raise
// std::domain_error.

std::uint32_t validate_level_width(std::uint32_t width_bits, std::uint32_t s);

Payload serialize_dense(const QuantizedShard& shard, std::uint32_t width_bits);
QuantizedShard deserialize_dense(std::span<const std::byte> bytes,
                                 std::uint32_t width_bits);

Payload serialize_sparse(const SparseShard& shard, std::uint32_t width_bits);
SparseShard deserialize_sparse(std::span<const std::byte> bytes,
                               std::uint32_t width_bits);

std::size_t dense_payload_size(std::uint32_t dim, std::uint32_t width_bits);
std::size_t sparse_payload_size(std::uint32_t nnz, std::uint32_t width_bits);

}  // namespace gqsgd
