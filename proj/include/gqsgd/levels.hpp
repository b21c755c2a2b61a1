#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gqsgd {

enum class LevelKind { Standard, Exponential, Custom };

std::string to_string(LevelKind kind);
LevelKind level_kind_from_string(const std::string& name);

// A quantization grid on [0, 1]: s+1 strictly decreasing levels with
// levels[0] == 1 and levels[s] == 0. Values are rounded stochastically to one
// of the two bracketing levels and transported as the level index.
//
// Standard: levels[i] = (s - i) / s, the uniform grid.
// Exponential: levels[i] = 2^-i for i < s, levels[s] = 0; indices are binary
// exponents, which is what makes aggregation representable in exponent
// arithmetic downstream.
class LevelScheme {
 public:
  static LevelScheme standard(std::uint32_t s);
  static LevelScheme exponential(std::uint32_t s);
  // Any strictly decreasing grid from 1 to 0. Throws std::invalid_argument
  // if the endpoints or monotonicity are off.
  static LevelScheme custom(std::vector<double> levels);

  LevelKind kind() const { return kind_; }
  std::uint32_t s() const { return static_cast<std::uint32_t>(levels_.size()) - 1; }
  double level(std::uint32_t i) const { return levels_[i]; }
  const std::vector<double>& levels() const { return levels_; }

  // Index u of the bracket [levels[u+1], levels[u]] containing y.
  // y on a grid point returns the bracket having y as its upper end
  // (so bracket_index(1) == 0 and bracket_index(0) == s - 1).
  std::uint32_t bracket_index(double y) const;

  // Stochastic rounding of y in [0, 1] using one uniform draw u in [0, 1):
  // within bracket u* the result is u* with probability
  // (y - lo) / (hi - lo), else u* + 1. Unbiased by construction.
  std::uint32_t random_round(double y, double u) const;

  // Exact conditional variance of the rounded level given y:
  // (hi - y) * (y - lo) over the bracket. Zero exactly on grid points.
  double round_variance(double y) const;

  // Probability the rounded index is not s (the zero level), i.e. the
  // element survives as a nonzero: y / levels[s-1] capped at 1.
  double nonzero_probability(double y) const;

 private:
  LevelScheme(LevelKind kind, std::vector<double> levels);

  LevelKind kind_;
  std::vector<double> levels_;
};

}  // namespace gqsgd
