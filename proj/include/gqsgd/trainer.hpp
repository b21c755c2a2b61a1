#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gqsgd/algorithm.hpp"

namespace gqsgd {

enum class TaskKind { Quadratic, Logistic };
enum class Compression { None, Gqsgd };

std::string to_string(TaskKind k);
std::string to_string(Compression c);

// Distributed SGD on synthetic tasks. `comm` carries the quantization and
// transport settings; workers/seed are mirrored into it by run_experiment.
struct TrainConfig {
  TaskKind task = TaskKind::Quadratic;
  std::uint32_t workers = 8;
  std::uint32_t dim = 256;
  std::uint32_t samples = 64;   // per-worker data points (logistic)
  std::uint32_t steps = 200;
  double eta = 0.0;             // 0 = 1 / (2 L (1 + theta n))
  std::uint32_t batch = 0;      // 0 = exact local gradients
  double hetero = 0.0;          // spread between workers' objectives
  double noise = 0.0;           // per-sample target noise (quadratic)
  double lambda = 1e-3;         // ridge weight (logistic)
  std::uint64_t seed = 1;
  Compression compression = Compression::Gqsgd;
  GqsgdConfig comm;
  std::uint32_t record_every = 1;
  std::string out;              // trajectory csv path; empty = keep in memory
};

// Key=value configuration file, one pair per line, '#' comments. Unknown
// keys raise std::invalid_argument; values use the same spellings as the
// CLI flags (scheme=exponential, norm=inf,inf, topo=tree, ...).
TrainConfig load_train_config(const std::string& path);
void apply_config_pair(TrainConfig& cfg, const std::string& key,
                       const std::string& value);

// A concrete instantiated task. Quadratic: per-worker diagonal curvatures
// and targets with a closed-form optimum. Logistic: per-worker samples of a
// shared ridge-regularized classification problem.
class TrainTask {
 public:
  static TrainTask make(const TrainConfig& cfg);

  TaskKind kind() const { return kind_; }
  std::uint32_t workers() const { return workers_; }
  std::uint32_t dim() const { return dim_; }

  // Mean-over-samples loss averaged over workers.
  double loss(const std::vector<double>& x) const;
  // One gradient per worker; batch = 0 is the exact local gradient, batch =
  // B draws B samples with replacement keyed by (seed, worker, step).
  std::vector<std::vector<double>> gradients(const std::vector<double>& x,
                                             std::uint32_t step,
                                             std::uint32_t batch) const;

  // Smoothness constant of the mean objective (an upper bound for the
  // logistic task).
  double lipschitz() const { return lipschitz_; }

  // Quadratic only; throws std::domain_error for tasks without a closed form.
  const std::vector<double>& x_star() const;
  double f_star() const;

 private:
  TaskKind kind_ = TaskKind::Quadratic;
  std::uint32_t workers_ = 0;
  std::uint32_t dim_ = 0;
  std::uint64_t seed_ = 0;
  double noise_ = 0.0;
  double lambda_ = 0.0;
  std::uint32_t samples_ = 0;

  // Quadratic: curvature and target per worker and coordinate.
  std::vector<std::vector<double>> curv_, target_;
  std::vector<double> x_star_;
  double f_star_ = 0.0;
  double lipschitz_ = 0.0;

  // Logistic: features[worker][sample * dim + j], labels in {-1, +1}.
  std::vector<std::vector<double>> features_;
  std::vector<std::vector<std::int8_t>> labels_;
};

struct StepRecord {
  std::uint32_t step = 0;
  double loss = 0.0;
  std::uint64_t bytes = 0;    // cumulative payload + norm traffic per run
  double grad_var = 0.0;      // ||used estimate - exact mean gradient||^2
};

struct RunResult {
  std::vector<StepRecord> records;
  std::vector<double> x_final;
  double final_loss = 0.0;
  std::uint64_t total_bytes = 0;
  double eta_used = 0.0;
  double theta_used = 0.0;    // variance bound behind the default stepsize
};

RunResult run_experiment(const TrainConfig& cfg);

void write_csv(const std::string& path, const std::vector<StepRecord>& records);

}  // namespace gqsgd
