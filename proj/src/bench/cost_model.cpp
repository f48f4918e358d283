#include "halfsync/bench/cost_model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

#include "halfsync/errors.hpp"

namespace halfsync::bench {

std::size_t tree_depth(std::size_t workers) {
  std::size_t depth = 0;
  while ((std::size_t{1} << depth) < workers) ++depth;
  return depth;
}

CostFit fit_cost_model(std::span<const TimingRecord> records) {
  std::set<std::size_t> distinct;
  for (const auto& r : records) {
    if (r.workers == 0) throw DataError("timing record with zero workers");
    if (!std::isfinite(r.t_batch_ms) || !std::isfinite(r.t_sync_ms) || r.t_batch_ms < 0.0 || r.t_sync_ms < 0.0) {
      throw DataError(fmt::format("invalid timing record at N={}: t_batch={} t_sync={}", r.workers, r.t_batch_ms,
                                  r.t_sync_ms));
    }
    distinct.insert(r.workers);
  }
  if (distinct.size() < 3) {
    throw DataError(fmt::format("cost model needs at least 3 distinct worker counts, got {}", distinct.size()));
  }

  double batch_sum = 0.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double sync_sum = 0.0;
  for (const auto& r : records) {
    const double x = static_cast<double>(tree_depth(r.workers));
    batch_sum += r.t_batch_ms;
    sxy += x * r.t_sync_ms;
    sxx += x * x;
    sync_sum += r.t_sync_ms;
  }
  const double n = static_cast<double>(records.size());
  CostFit fit;
  fit.model.a_ms = batch_sum / n;
  fit.model.b_ms = sxy / sxx;

  const double mean_sync = sync_sum / n;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& r : records) {
    const double x = static_cast<double>(tree_depth(r.workers));
    const double e = r.t_sync_ms - fit.model.b_ms * x;
    const double d = r.t_sync_ms - mean_sync;
    ss_res += e * e;
    ss_tot += d * d;
  }
  if (ss_tot > 0.0) {
    fit.r_squared = 1.0 - ss_res / ss_tot;
  } else {
    fit.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
  }
  return fit;
}

double predict_epoch_time(const CostModel& model, std::size_t workers, double batches) {
  if (workers == 0) throw ConfigError("predict_epoch_time: N must be at least 1");
  const double n = static_cast<double>(workers);
  return (batches / n) * (model.a_ms + model.b_ms * std::log2(n));
}

double gradient_volume_bytes(double n_par, double batch, double dtype_bytes) {
  return n_par * batch * dtype_bytes;
}

double iteration_time_estimate(double n_par, double batch, double dtype_bytes, double bandwidth_bytes_per_s) {
  for (double v : {n_par, batch, dtype_bytes, bandwidth_bytes_per_s}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(fmt::format("iteration_time_estimate: inputs must be positive and finite, got {}", v));
    }
  }
  return gradient_volume_bytes(n_par, batch, dtype_bytes) / bandwidth_bytes_per_s;
}

model::ModelConfig capacity_base_config() {
  model::ModelConfig c;
  c.feature_dim = 9;
  c.hidden = 200;
  c.fc_hidden = 200;
  c.seq_len = 128;
  c.lstm_layers = 1;
  return c;
}

std::size_t max_layers(double memory_bytes, numerics::Precision precision, std::size_t batch) {
  if (!(memory_bytes > 0.0) || !std::isfinite(memory_bytes)) {
    throw ConfigError(fmt::format("capacity: memory must be positive, got {}", memory_bytes));
  }
  if (batch == 0) throw ConfigError("capacity: batch must be at least 1");
  const double budget = kCapacityCalibration * memory_bytes / kCapacityReferenceMemory;
  const double per_layer = static_cast<double>(numerics::byte_size(precision)) * static_cast<double>(batch);
  return static_cast<std::size_t>(std::llround(budget / per_layer));
}

std::vector<CapacityRow> capacity_table(double memory_bytes, const model::ModelConfig& base,
                                        std::span<const numerics::Precision> precisions,
                                        std::span<const std::size_t> batches) {
  static constexpr numerics::Precision kPrecisions[] = {numerics::Precision::fp64, numerics::Precision::fp32,
                                                       numerics::Precision::fp16};
  static constexpr std::size_t kBatches[] = {256, 64};
  if (precisions.empty()) precisions = kPrecisions;
  if (batches.empty()) batches = kBatches;

  std::vector<CapacityRow> rows;
  for (std::size_t batch : batches) {
    for (numerics::Precision p : precisions) {
      CapacityRow row{p, batch, max_layers(memory_bytes, p, batch), 0};
      if (row.layers > 0) {
        model::ModelConfig c = base;
        c.lstm_layers = row.layers;
        row.params = model::count_params(c);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace halfsync::bench
