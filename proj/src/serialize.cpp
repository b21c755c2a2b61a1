#include "gqsgd/serialize.hpp"

#include <cstring>
#include <stdexcept>

namespace gqsgd {

namespace {

class Writer {
 public:
  explicit Writer(Payload& out) : out_(out) {}

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
    }
  }

  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) {
      out_.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xff));
    }
  }

  void lane(std::uint32_t v, std::uint32_t width_bits) {
    for (std::uint32_t i = 0; i < width_bits / 8; ++i) {
      out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
    }
  }

  void bitmap(std::span<const std::int8_t> signs) {
    std::uint8_t cur = 0;
    for (std::size_t j = 0; j < signs.size(); ++j) {
      if (signs[j] < 0) cur |= static_cast<std::uint8_t>(1u << (j % 8));
      if (j % 8 == 7) {
        out_.push_back(static_cast<std::byte>(cur));
        cur = 0;
      }
    }
    if (signs.size() % 8 != 0) out_.push_back(static_cast<std::byte>(cur));
  }

 private:
  Payload& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::uint32_t lane(std::uint32_t width_bits) {
    const std::uint32_t n = width_bits / 8;
    need(n);
    std::uint32_t v = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += n;
    return v;
  }

  std::vector<std::int8_t> bitmap(std::size_t count) {
    const std::size_t bytes = (count + 7) / 8;
    need(bytes);
    std::vector<std::int8_t> signs(count);
    for (std::size_t j = 0; j < count; ++j) {
      const auto b = static_cast<std::uint8_t>(in_[pos_ + j / 8]);
      signs[j] = (b >> (j % 8)) & 1 ? std::int8_t{-1} : std::int8_t{1};
    }
    pos_ += bytes;
    return signs;
  }

  void finish() const {
    if (pos_ != in_.size()) throw std::domain_error("trailing bytes in payload");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw std::domain_error("truncated payload");
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t validate_level_width(std::uint32_t width_bits, std::uint32_t s) {
  if (width_bits != 8 && width_bits != 16 && width_bits != 32) {
    throw std::invalid_argument("level lane width must be 8, 16, or 32 bits");
  }
  if (width_bits < 32 && s > ((1u << width_bits) - 1)) {
    throw std::invalid_argument("level index does not fit the lane width");
  }
  return width_bits;
}

std::size_t dense_payload_size(std::uint32_t dim, std::uint32_t width_bits) {
  return 12 + (dim + 7) / 8 + std::size_t{dim} * (width_bits / 8);
}

std::size_t sparse_payload_size(std::uint32_t nnz, std::uint32_t width_bits) {
  return 16 + std::size_t{nnz} * 4 + (nnz + 7) / 8 + std::size_t{nnz} * (width_bits / 8);
}

Payload serialize_dense(const QuantizedShard& shard, std::uint32_t width_bits) {
  Payload out;
  out.reserve(dense_payload_size(static_cast<std::uint32_t>(shard.size()), width_bits));
  Writer w(out);
  w.f64(shard.norm);
  w.u32(static_cast<std::uint32_t>(shard.size()));
  w.bitmap(shard.sign);
  for (std::uint32_t idx : shard.level_idx) w.lane(idx, width_bits);
  return out;
}

QuantizedShard deserialize_dense(std::span<const std::byte> bytes,
                                 std::uint32_t width_bits) {
  Reader r(bytes);
  QuantizedShard shard;
  shard.norm = r.f64();
  const std::uint32_t dim = r.u32();
  shard.sign = r.bitmap(dim);
  shard.level_idx.resize(dim);
  for (std::uint32_t j = 0; j < dim; ++j) shard.level_idx[j] = r.lane(width_bits);
  r.finish();
  return shard;
}

Payload serialize_sparse(const SparseShard& shard, std::uint32_t width_bits) {
  Payload out;
  out.reserve(sparse_payload_size(static_cast<std::uint32_t>(shard.index.size()),
                                  width_bits));
  Writer w(out);
  w.f64(shard.norm);
  w.u32(shard.dim);
  w.u32(static_cast<std::uint32_t>(shard.index.size()));
  for (std::uint32_t j : shard.index) w.u32(j);
  w.bitmap(shard.sign);
  for (std::uint32_t idx : shard.level_idx) w.lane(idx, width_bits);
  return out;
}

SparseShard deserialize_sparse(std::span<const std::byte> bytes,
                               std::uint32_t width_bits) {
  Reader r(bytes);
  SparseShard shard;
  shard.norm = r.f64();
  shard.dim = r.u32();
  const std::uint32_t nnz = r.u32();
  if (nnz > shard.dim) throw std::domain_error("more nonzeros than elements");
  shard.index.resize(nnz);
  for (std::uint32_t k = 0; k < nnz; ++k) shard.index[k] = r.u32();
  for (std::uint32_t k = 0; k < nnz; ++k) {
    if (shard.index[k] >= shard.dim || (k > 0 && shard.index[k] <= shard.index[k - 1])) {
      throw std::domain_error("sparse indices must be strictly increasing and in range");
    }
  }
  shard.sign = r.bitmap(nnz);
  shard.level_idx.resize(nnz);
  for (std::uint32_t k = 0; k < nnz; ++k) shard.level_idx[k] = r.lane(width_bits);
  r.finish();
  return shard;
}

}  // namespace gqsgd
