#pragma once

#include <cstdint>
#include <string>

namespace gqsgd {

// Ring-allreduce cost model. Units are seconds, bytes, and bytes/second;
// only ratios matter for the verdicts. omega is the throughput of the
// quantized reduction relative to native summation (gamma_hat = omega *
// gamma), rho the compression ratio (payload shrinks to S / rho), delta an
// optional per-byte de/quantization overhead on the original payload.
struct CostParams {
  double alpha = 1e-6;    // per-hop latency, seconds
  double beta = 53.9e9;   // link bandwidth, bytes/s
  double gamma = 2000e9;  // native reduction throughput, bytes/s
  double omega = 1.0;     // quantized reduction relative throughput
  double rho = 4.0;       // compression ratio
  double delta = 0.0;     // codec overhead, seconds per original byte
  std::uint32_t workers = 16;
  double size = 100e6;    // payload bytes per worker
};

// 2 log2(N) alpha + 2 log2(N) S / beta + log2(N) S / gamma.
double baseline_cost(const CostParams& p);

// Same shape on S / rho with reduction throughput omega * gamma, plus the
// codec term delta * S.
double quantized_cost(const CostParams& p);

enum class SpeedupVerdict { Always, Never, Threshold };

std::string to_string(SpeedupVerdict v);

// Solves quantized < baseline for beta with delta = 0: quantization wins
// exactly when beta < 2 omega (rho - 1) / (1 - omega rho) * gamma. When
// omega rho >= 1 the right side's sign flips and every bandwidth wins
// (Always); rho <= 1 with omega rho < 1 can never win (Never).
struct SpeedupThreshold {
  SpeedupVerdict verdict = SpeedupVerdict::Threshold;
  double beta_max = 0.0;  // meaningful only for Threshold
};

SpeedupThreshold speedup_threshold(double omega, double rho, double gamma);

struct Prediction {
  double baseline = 0.0;
  double quantized = 0.0;
  double speedup = 0.0;  // baseline / quantized
  bool beats_baseline = false;
  SpeedupThreshold threshold;
};

Prediction predict(const CostParams& p);

}  // namespace gqsgd
