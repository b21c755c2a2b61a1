#include "gqsgd/perf_model.hpp"

#include <cmath>
#include <stdexcept>

namespace gqsgd {

namespace {

void validate(const CostParams& p) {
  if (p.alpha < 0 || p.beta <= 0 || p.gamma <= 0 || p.omega <= 0 ||
      p.omega > 1.0 || p.rho <= 0 || p.delta < 0 || p.workers < 2 ||
      p.size <= 0) {
    throw std::invalid_argument("cost parameters out of range");
  }
}

}  // namespace

double baseline_cost(const CostParams& p) {
  validate(p);
  const double hops = std::log2(static_cast<double>(p.workers));
  return 2.0 * hops * p.alpha + 2.0 * hops * p.size / p.beta +
         hops * p.size / p.gamma;
}

double quantized_cost(const CostParams& p) {
  validate(p);
  const double hops = std::log2(static_cast<double>(p.workers));
  const double s_hat = p.size / p.rho;
  const double gamma_hat = p.omega * p.gamma;
  return 2.0 * hops * p.alpha + 2.0 * hops * s_hat / p.beta +
         hops * s_hat / gamma_hat + p.delta * p.size;
}

std::string to_string(SpeedupVerdict v) {
  switch (v) {
    case SpeedupVerdict::Always:
      return "Always";
    case SpeedupVerdict::Never:
      return "Never";
    case SpeedupVerdict::Threshold:
      return "Threshold";
  }
  return "?";
}

SpeedupThreshold speedup_threshold(double omega, double rho, double gamma) {
  if (omega <= 0 || omega > 1.0 || rho <= 0 || gamma <= 0) {
    throw std::invalid_argument("cost parameters out of range");
  }
  SpeedupThreshold out;
  if (rho <= 1.0) {
    // Payload does not shrink and the reduction cannot be faster than
    // native, so there is no bandwidth at which quantization wins.
    out.verdict = SpeedupVerdict::Never;
    return out;
  }
  if (omega * rho >= 1.0) {
    // The reduction term is no slower and the bandwidth term strictly
    // shrinks, so quantization wins at any beta.
    out.verdict = SpeedupVerdict::Always;
    return out;
  }
  out.verdict = SpeedupVerdict::Threshold;
  out.beta_max = 2.0 * omega * (rho - 1.0) / (1.0 - omega * rho) * gamma;
  return out;
}

Prediction predict(const CostParams& p) {
  Prediction out;
  out.baseline = baseline_cost(p);
  out.quantized = quantized_cost(p);
  out.speedup = out.baseline / out.quantized;
  out.beats_baseline = out.quantized < out.baseline;
  out.threshold = speedup_threshold(p.omega, p.rho, p.gamma);
  return out;
}

}  // namespace gqsgd
