#include "gqsgd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gqsgd/rng.hpp"
#include "gqsgd/verify.hpp"

namespace gqsgd {

std::string to_string(TaskKind k) {
  return k == TaskKind::Quadratic ? "quadratic" : "logistic";
}

std::string to_string(Compression c) {
  return c == Compression::None ? "none" : "gqsgd";
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got " + v);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_pair(TrainConfig& cfg, const std::string& key,
                       const std::string& value) {
  if (key == "task") {
    if (value == "quadratic") cfg.task = TaskKind::Quadratic;
    else if (value == "logistic") cfg.task = TaskKind::Logistic;
    else throw std::invalid_argument("unknown task: " + value);
  } else if (key == "workers") {
    cfg.workers = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "dim") {
    cfg.dim = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "samples") {
    cfg.samples = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "steps") {
    cfg.steps = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "eta") {
    cfg.eta = std::stod(value);
  } else if (key == "batch") {
    cfg.batch = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "hetero") {
    cfg.hetero = std::stod(value);
  } else if (key == "noise") {
    cfg.noise = std::stod(value);
  } else if (key == "lambda") {
    cfg.lambda = std::stod(value);
  } else if (key == "seed") {
    cfg.seed = std::stoull(value);
  } else if (key == "compression") {
    if (value == "none") cfg.compression = Compression::None;
    else if (value == "gqsgd") cfg.compression = Compression::Gqsgd;
    else throw std::invalid_argument("unknown compression: " + value);
  } else if (key == "scheme") {
    cfg.comm.scheme = level_kind_from_string(value);
  } else if (key == "s") {
    cfg.comm.s = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "norm") {
    cfg.comm.norm = norm_spec_from_string(value);
  } else if (key == "sparse") {
    cfg.comm.sparse = parse_bool(value);
  } else if (key == "width") {
    cfg.comm.width_bits = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "topo") {
    cfg.comm.topo = topology_from_string(value);
  } else if (key == "transport") {
    cfg.comm.transport = transport_from_string(value);
  } else if (key == "record_every") {
    cfg.record_every = static_cast<std::uint32_t>(std::stoul(value));
  } else if (key == "out") {
    cfg.out = value;
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    }
    apply_config_pair(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

TrainTask TrainTask::make(const TrainConfig& cfg) {
  if (cfg.workers == 0 || cfg.dim == 0) {
    throw std::invalid_argument("workers and dim must be positive");
  }
  TrainTask task;
  task.kind_ = cfg.task;
  task.workers_ = cfg.workers;
  task.dim_ = cfg.dim;
  task.seed_ = cfg.seed;
  task.noise_ = cfg.noise;
  task.lambda_ = cfg.lambda;
  task.samples_ = cfg.samples;
  const CounterRng rng(cfg.seed);
  const std::uint32_t n = cfg.workers, d = cfg.dim;

  if (cfg.task == TaskKind::Quadratic) {
    task.curv_.assign(n, std::vector<double>(d));
    task.target_.assign(n, std::vector<double>(d));
    for (std::uint32_t j = 0; j < d; ++j) {
      const double base_curv = 0.5 + 1.5 * rng.u01(RngStream::TaskGen, 1, j, 0);
      const double base_target = rng.normal(RngStream::TaskGen, 2, j, 0);
      for (std::uint32_t i = 0; i < n; ++i) {
        const double jitter =
            2.0 * rng.u01(RngStream::TaskGen, 3, i, j) - 1.0;
        task.curv_[i][j] = base_curv * (1.0 + cfg.hetero * jitter);
        task.target_[i][j] =
            base_target + cfg.hetero * rng.normal(RngStream::TaskGen, 4, i, j);
      }
    }
    task.x_star_.resize(d);
    task.lipschitz_ = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) {
      double hc = 0.0, h = 0.0;
      for (std::uint32_t i = 0; i < n; ++i) {
        hc += task.curv_[i][j] * task.target_[i][j];
        h += task.curv_[i][j];
      }
      task.x_star_[j] = hc / h;
      task.lipschitz_ = std::max(task.lipschitz_, h / n);
    }
    task.f_star_ = task.loss(task.x_star_);
    return task;
  }

  // Logistic: shared ground truth, per-worker samples, 5% label flips.
  if (cfg.samples == 0) {
    throw std::invalid_argument("logistic task needs samples >= 1");
  }
  std::vector<double> w_star(d);
  for (std::uint32_t j = 0; j < d; ++j) {
    w_star[j] = rng.normal(RngStream::TaskGen, 5, j, 0);
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  task.features_.assign(n, std::vector<double>(std::size_t{cfg.samples} * d));
  task.labels_.assign(n, std::vector<std::int8_t>(cfg.samples));
  double max_row_norm2 = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t k = 0; k < cfg.samples; ++k) {
      const std::uint64_t ik = (std::uint64_t{i} << 32) | k;
      double margin = 0.0, row_norm2 = 0.0;
      for (std::uint32_t j = 0; j < d; ++j) {
        const double a =
            rng.normal(RngStream::TaskGen, 6, ik, j) * inv_sqrt_d;
        task.features_[i][std::size_t{k} * d + j] = a;
        margin += a * w_star[j];
        row_norm2 += a * a;
      }
      max_row_norm2 = std::max(max_row_norm2, row_norm2);
      bool positive = margin >= 0.0;
      if (rng.u01(RngStream::TaskGen, 7, ik, 0) < 0.05) positive = !positive;
      task.labels_[i][k] = positive ? std::int8_t{1} : std::int8_t{-1};
    }
  }
  task.lipschitz_ = 0.25 * max_row_norm2 + cfg.lambda;
  return task;
}

double TrainTask::loss(const std::vector<double>& x) const {
  if (x.size() != dim_) throw std::invalid_argument("iterate has wrong dimension");
  const double n = workers_;
  if (kind_ == TaskKind::Quadratic) {
    double total = 0.0;
    for (std::uint32_t i = 0; i < workers_; ++i) {
      for (std::uint32_t j = 0; j < dim_; ++j) {
        const double r = x[j] - target_[i][j];
        total += 0.5 * curv_[i][j] * r * r;
      }
    }
    return total / n;
  }
  double total = 0.0;
  for (std::uint32_t i = 0; i < workers_; ++i) {
    double worker_loss = 0.0;
    for (std::uint32_t k = 0; k < samples_; ++k) {
      double margin = 0.0;
      for (std::uint32_t j = 0; j < dim_; ++j) {
        margin += features_[i][std::size_t{k} * dim_ + j] * x[j];
      }
      worker_loss += std::log1p(std::exp(-labels_[i][k] * margin));
    }
    total += worker_loss / samples_;
  }
  double reg = 0.0;
  for (double v : x) reg += v * v;
  return total / n + 0.5 * lambda_ * reg;
}

std::vector<std::vector<double>> TrainTask::gradients(
    const std::vector<double>& x, std::uint32_t step,
    std::uint32_t batch) const {
  if (x.size() != dim_) throw std::invalid_argument("iterate has wrong dimension");
  const CounterRng rng(seed_);
  std::vector<std::vector<double>> grads(workers_, std::vector<double>(dim_));

  if (kind_ == TaskKind::Quadratic) {
    for (std::uint32_t i = 0; i < workers_; ++i) {
      if (batch == 0 || noise_ == 0.0) {
        for (std::uint32_t j = 0; j < dim_; ++j) {
          grads[i][j] = curv_[i][j] * (x[j] - target_[i][j]);
        }
      } else {
        // Fresh targets drawn around the worker mean: an unbiased gradient
        // with per-coordinate variance curv^2 noise^2 / batch.
        const std::uint64_t is = (std::uint64_t{i} << 32) | step;
        for (std::uint32_t j = 0; j < dim_; ++j) {
          double noise_mean = 0.0;
          for (std::uint32_t b = 0; b < batch; ++b) {
            noise_mean += rng.normal(RngStream::Batch, is, b, j);
          }
          noise_mean /= batch;
          const double target = target_[i][j] + noise_ * noise_mean;
          grads[i][j] = curv_[i][j] * (x[j] - target);
        }
      }
    }
    return grads;
  }

  for (std::uint32_t i = 0; i < workers_; ++i) {
    const std::uint32_t count = batch == 0 ? samples_ : batch;
    const std::uint64_t is = (std::uint64_t{i} << 32) | step;
    for (std::uint32_t b = 0; b < count; ++b) {
      const std::uint32_t k =
          batch == 0 ? b
                     : static_cast<std::uint32_t>(
                           rng.bits(RngStream::Batch, is, b, 0) % samples_);
      double margin = 0.0;
      for (std::uint32_t j = 0; j < dim_; ++j) {
        margin += features_[i][std::size_t{k} * dim_ + j] * x[j];
      }
      const double y = labels_[i][k];
      const double sig = 1.0 / (1.0 + std::exp(y * margin));  // sigma(-y margin)
      for (std::uint32_t j = 0; j < dim_; ++j) {
        grads[i][j] += -y * sig * features_[i][std::size_t{k} * dim_ + j] / count;
      }
    }
    for (std::uint32_t j = 0; j < dim_; ++j) {
      grads[i][j] += lambda_ * x[j];
    }
  }
  return grads;
}

const std::vector<double>& TrainTask::x_star() const {
  if (kind_ != TaskKind::Quadratic) {
    throw std::domain_error("no closed-form optimum for this task");
  }
  return x_star_;
}

double TrainTask::f_star() const {
  if (kind_ != TaskKind::Quadratic) {
    throw std::domain_error("no closed-form optimum for this task");
  }
  return f_star_;
}

RunResult run_experiment(const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  cfg.comm.workers = cfg.workers;
  cfg.comm.seed = cfg.seed;
  const TrainTask task = TrainTask::make(cfg);
  const std::uint32_t n = cfg.workers, d = cfg.dim;

  RunResult res;
  if (cfg.compression == Compression::Gqsgd &&
      theta_bound_applies(cfg.comm.scheme, cfg.comm.s, n, d)) {
    res.theta_used = theta_bound(cfg.comm.scheme, cfg.comm.s, n, d);
  }
  res.eta_used = cfg.eta;
  if (res.eta_used == 0.0) {
    res.eta_used = 1.0 / (2.0 * task.lipschitz() * (1.0 + res.theta_used * n));
  }

  std::vector<double> x(d, 0.0);
  std::uint64_t bytes = 0;
  res.records.push_back({0, task.loss(x), 0, 0.0});

  for (std::uint32_t t = 0; t < cfg.steps; ++t) {
    const auto grads = task.gradients(x, t, cfg.batch);
    std::vector<double> exact_mean(d, 0.0);
    for (const auto& g : grads) {
      for (std::uint32_t j = 0; j < d; ++j) exact_mean[j] += g[j] / n;
    }

    std::vector<double> estimate;
    if (cfg.compression == Compression::None) {
      const BaselineResult base = baseline_mean(grads, n, cfg.comm.topo,
                                                cfg.comm.transport, t);
      estimate = base.per_worker.front();
      bytes += base.traffic.total_bytes;
    } else {
      const MeanResult mean = gqsgd_mean(grads, cfg.comm, t);
      estimate = mean.mean();
      bytes += mean.payload_traffic.total_bytes + mean.norm_traffic.total_bytes;
    }

    double dev2 = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) {
      const double dev = estimate[j] - exact_mean[j];
      dev2 += dev * dev;
      x[j] -= res.eta_used * estimate[j];
    }

    const std::uint32_t step = t + 1;
    if (step % cfg.record_every == 0 || step == cfg.steps) {
      res.records.push_back({step, task.loss(x), bytes, dev2});
    }
  }

  res.x_final = std::move(x);
  res.final_loss = res.records.back().loss;
  res.total_bytes = bytes;
  if (!cfg.out.empty()) write_csv(cfg.out, res.records);
  return res;
}

void write_csv(const std::string& path, const std::vector<StepRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << "step,loss,bytes,grad_var\n";
  std::ostringstream line;
  line.precision(17);
  for (const StepRecord& r : records) {
    line.str("");
    line << r.step << ',' << r.loss << ',' << r.bytes << ',' << r.grad_var << '\n';
    out << line.str();
  }
}

}  // namespace gqsgd
