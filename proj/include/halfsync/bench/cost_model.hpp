#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "halfsync/model/params.hpp"
#include "halfsync/numerics/precision.hpp"

namespace halfsync::bench {

/// Per-mini-batch compute and collective time measured at one worker count.
struct TimingRecord {
  std::size_t workers = 1;
  double t_batch_ms = 0.0;
  double t_sync_ms = 0.0;
  numerics::Precision precision = numerics::Precision::fp32;
};

/// T_epoch(N) = (batches / N) * (A + B * log2 N).
struct CostModel {
  double a_ms = 0.0;
  double b_ms = 0.0;
};

struct CostFit {
  CostModel model;
  /// Goodness of the sync fit, 1 - SS_res / SS_tot (centered). Defined as 1
  /// for a perfect fit of constant data and 0 for an imperfect one.
  double r_squared = 0.0;
};

/// ceil(log2 N): binomial-tree depth for N workers.
std::size_t tree_depth(std::size_t workers);

/// A = mean T_batch; B = least-squares slope of T_sync on ceil(log2 N)
/// through the origin. Throws DataError for fewer than 3 distinct worker
/// counts, N = 0, or negative or non-finite times.
CostFit fit_cost_model(std::span<const TimingRecord> records);

/// (batches / N) * (A + B * log2 N), batches counted at N = 1.
/// Throws ConfigError for N = 0.
double predict_epoch_time(const CostModel& model, std::size_t workers, double batches);

/// Bytes exchanged per iteration counted as n_par * batch * dtype bytes.
double gradient_volume_bytes(double n_par, double batch, double dtype_bytes);

/// gradient_volume_bytes / bandwidth, in seconds. Throws ConfigError unless
/// every input is positive and finite.
double iteration_time_estimate(double n_par, double batch, double dtype_bytes, double bandwidth_bytes_per_s);

struct CapacityRow {
  numerics::Precision precision = numerics::Precision::fp32;
  std::size_t batch = 0;
  std::size_t layers = 0;
  std::size_t params = 0;
};

/// Memory is taken as activation-dominated: layers * dtype bytes * batch is
/// held constant. Calibrated once at 16 GB from 29 fp32 layers at batch 256.
inline constexpr double kCapacityReferenceMemory = 16.0e9;
inline constexpr double kCapacityCalibration = 29.0 * 4.0 * 256.0;

/// LSTM stack sized 200 hidden units, 200 fc units, 9 features, 128 steps.
model::ModelConfig capacity_base_config();

/// Layer count that fits `memory_bytes`, rounded to nearest (ties away from
/// zero). Throws ConfigError for non-positive memory or batch 0.
std::size_t max_layers(double memory_bytes, numerics::Precision precision, std::size_t batch);

/// One row per (batch, precision), batch-major in the given orders.
std::vector<CapacityRow> capacity_table(
    double memory_bytes, const model::ModelConfig& base = capacity_base_config(),
    std::span<const numerics::Precision> precisions = {},
    std::span<const std::size_t> batches = {});

}  // namespace halfsync::bench
