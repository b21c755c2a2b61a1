#include "gqsgd/levels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gqsgd {

std::string to_string(LevelKind kind) {
  switch (kind) {
    case LevelKind::Standard:
      return "standard";
    case LevelKind::Exponential:
      return "exponential";
    case LevelKind::Custom:
      return "custom";
  }
  return "?";
}

LevelKind level_kind_from_string(const std::string& name) {
  if (name == "standard") return LevelKind::Standard;
  if (name == "exponential") return LevelKind::Exponential;
  if (name == "custom") return LevelKind::Custom;
  throw std::invalid_argument("unknown level scheme: " + name);
}

LevelScheme::LevelScheme(LevelKind kind, std::vector<double> levels)
    : kind_(kind), levels_(std::move(levels)) {}

LevelScheme LevelScheme::standard(std::uint32_t s) {
  if (s == 0) throw std::invalid_argument("level count s must be >= 1");
  std::vector<double> levels(s + 1);
  for (std::uint32_t i = 0; i <= s; ++i) {
    levels[i] = static_cast<double>(s - i) / static_cast<double>(s);
  }
  return LevelScheme(LevelKind::Standard, std::move(levels));
}

LevelScheme LevelScheme::exponential(std::uint32_t s) {
  if (s == 0) throw std::invalid_argument("level count s must be >= 1");
  std::vector<double> levels(s + 1);
  for (std::uint32_t i = 0; i < s; ++i) {
    levels[i] = std::ldexp(1.0, -static_cast<int>(i));
  }
  levels[s] = 0.0;
  return LevelScheme(LevelKind::Exponential, std::move(levels));
}

LevelScheme LevelScheme::custom(std::vector<double> levels) {
  if (levels.size() < 2) throw std::invalid_argument("grid needs >= 2 levels");
  if (levels.front() != 1.0 || levels.back() != 0.0) {
    throw std::invalid_argument("grid must run from 1 down to 0");
  }
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i] < levels[i - 1])) {
      throw std::invalid_argument("grid must be strictly decreasing");
    }
  }
  return LevelScheme(LevelKind::Custom, std::move(levels));
}

std::uint32_t LevelScheme::bracket_index(double y) const {
  if (!(y >= 0.0 && y <= 1.0)) {
    throw std::invalid_argument("normalized magnitude outside [0, 1]");
  }
  // First level strictly below y sits at lower_bound over the descending
  // grid; the bracket upper end is one before it.
  auto it = std::lower_bound(levels_.begin(), levels_.end(), y,
                             [](double level, double v) { return level >= v; });
  std::size_t first_below = static_cast<std::size_t>(it - levels_.begin());
  if (first_below == 0) return 0;  // y == 1.0
  std::size_t u = first_below - 1;
  if (u > levels_.size() - 2) u = levels_.size() - 2;
  return static_cast<std::uint32_t>(u);
}

std::uint32_t LevelScheme::random_round(double y, double u) const {
  const std::uint32_t lo_idx = bracket_index(y);
  const double hi = levels_[lo_idx];
  const double lo = levels_[lo_idx + 1];
  const double p_hi = (y - lo) / (hi - lo);
  return (u < p_hi) ? lo_idx : lo_idx + 1;
}

double LevelScheme::round_variance(double y) const {
  const std::uint32_t lo_idx = bracket_index(y);
  const double hi = levels_[lo_idx];
  const double lo = levels_[lo_idx + 1];
  return (hi - y) * (y - lo);
}

double LevelScheme::nonzero_probability(double y) const {
  const double bottom = levels_[levels_.size() - 2];
  if (y >= bottom) return 1.0;
  return y / bottom;
}

}  // namespace gqsgd
