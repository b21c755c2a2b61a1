#include "gqsgd/norms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gqsgd {

std::string to_string(const NormSpec& spec) {
  auto one = [](std::uint32_t v) {
    return v == kNormInf ? std::string("inf") : std::to_string(v);
  };
  return one(spec.q) + "," + one(spec.p);
}

NormSpec norm_spec_from_string(const std::string& text) {
  if (text == "linf") return NormSpec{kNormInf, kNormInf};
  if (text == "l2") return NormSpec{2, 2};
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw std::invalid_argument("norm spec must be linf, l2, or 'q,p'");
  }
  auto parse = [](const std::string& part) -> std::uint32_t {
    if (part == "inf") return kNormInf;
    const unsigned long v = std::stoul(part);
    if (v == 0 || v > 16) throw std::invalid_argument("norm order out of range");
    return static_cast<std::uint32_t>(v);
  };
  return NormSpec{parse(text.substr(0, comma)), parse(text.substr(comma + 1))};
}

namespace {

double vector_norm(std::span<const double> x, std::uint32_t q) {
  if (q == kNormInf) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
  }
  if (q == 2) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    return std::sqrt(ss);
  }
  double acc = 0.0;
  for (double v : x) acc += std::pow(std::fabs(v), static_cast<double>(q));
  return std::pow(acc, 1.0 / static_cast<double>(q));
}

}  // namespace

double local_norm_stat(std::span<const double> x, const NormSpec& spec) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("gradient contains NaN or Inf");
    }
  }
  const double nq = vector_norm(x, spec.q);
  if (spec.p == kNormInf) return nq;
  if (spec.p == 2) return nq * nq;
  return std::pow(nq, static_cast<double>(spec.p));
}

double combine_norm_stats(std::span<const double> stats, const NormSpec& spec) {
  if (stats.empty()) throw std::invalid_argument("no norm statistics");
  if (spec.p == kNormInf) {
    double m = 0.0;
    for (double v : stats) m = std::max(m, v);
    return m;
  }
  double acc = 0.0;
  for (double v : stats) acc += v;
  if (spec.p == 2) return std::sqrt(acc);
  return std::pow(acc, 1.0 / static_cast<double>(spec.p));
}

double global_norm(const std::vector<std::vector<double>>& shards,
                   const NormSpec& spec) {
  std::vector<double> stats;
  stats.reserve(shards.size());
  for (const auto& x : shards) stats.push_back(local_norm_stat(x, spec));
  return combine_norm_stats(stats, spec);
}

}  // namespace gqsgd
