#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "halfsync/bench/cost_model.hpp"
#include "halfsync/numerics/precision.hpp"

namespace halfsync::bench {

/// Strong-scaling run over the in-process transport with a virtual clock:
/// compute is charged as a fixed batch_ms and every hop costs latency_ms
/// plus its bytes over the bandwidth.
struct ScalingOptions {
  std::vector<std::size_t> workers{2, 4, 8, 16, 32, 64, 128};
  double latency_ms = 2.0;
  double bandwidth_bytes_per_ms = 1.0e7;
  double batch_ms = 50.0;
  /// Mini-batches per epoch at N = 1; must be divisible by every N.
  std::size_t batches = 1024;
  /// Gradient and parameter elements exchanged per step.
  std::size_t payload = 1024;
  numerics::Precision sync = numerics::Precision::fp32;

  void validate() const;
};

struct ScalingPoint {
  std::size_t workers = 0;
  double t_batch_ms = 0.0;      // mean compute per step at rank 0
  double t_sync_ms = 0.0;       // mean allreduce + parameter broadcast per step at rank 0
  double t_epoch_ms = 0.0;      // rank 0 clock across the epoch
  double t_allreduce_ms = 0.0;  // one isolated allreduce from aligned clocks, as seen by rank 0
  std::size_t steps = 0;
};

std::vector<ScalingPoint> run_strong_scaling(const ScalingOptions& options);

/// Per-step records (T_sync = allreduce + broadcast).
std::vector<TimingRecord> step_records(const std::vector<ScalingPoint>& points, numerics::Precision precision);
/// Isolated-allreduce records (T_sync = rank 0 allreduce latency).
std::vector<TimingRecord> allreduce_records(const std::vector<ScalingPoint>& points, numerics::Precision precision);

/// Header N,t_batch_ms,t_sync_ms,ratio.
void write_scaling_csv(const std::string& path, const std::vector<ScalingPoint>& points);
/// Header N,t_epoch_ms,predicted_ms.
void write_epoch_csv(const std::string& path, const std::vector<ScalingPoint>& points, const CostModel& model,
                     double batches);
/// epoch_time.svg and sync_ratio.svg under `dir`.
void write_scaling_plots(const std::string& dir, const std::vector<ScalingPoint>& points, const CostModel& model,
                         double batches);

}  // namespace halfsync::bench
