#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "halfsync/collective/communicator.hpp"
#include "halfsync/data/batching.hpp"
#include "halfsync/data/shots.hpp"
#include "halfsync/model/params.hpp"
#include "halfsync/numerics/tensor.hpp"
#include "halfsync/optim/sgd.hpp"
#include "halfsync/trainer/config.hpp"

namespace halfsync::trainer {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean unscaled hinge loss over all ranks' batches
  double val_auc = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
  std::size_t overflow_count = 0;   // gradient coordinates that became Inf on the wire
  std::size_t underflow_count = 0;  // non-zero gradient coordinates flushed to zero
  std::size_t wire_zero_count = 0;  // gradient coordinates equal to zero on the wire
};

/// Per-rank state between steps. Rank 0 also owns the master weights and
/// the momentum buffer at update precision.
struct RankState {
  model::Parameters working;
  std::optional<model::Parameters> master;
  std::optional<optim::SgdMomentumState> momentum;

  explicit RankState(const model::ModelConfig& config) : working(config) {}
};

struct StepOutcome {
  double loss = 0.0;  // this rank's unscaled loss
  numerics::RoundingStats wire;
  std::size_t contributors = 0;
};

/// Rank 0 initializes the weights and broadcasts them at sync precision.
RankState init_rank_state(collective::Communicator& comm, const RunConfig& cfg);

/// One synchronous step: local fprop/bprop with the alpha-scaled loss,
/// gradients cast to the sync type and summed across ranks, averaged by the
/// contributor count and descaled on rank 0, updated there, then broadcast.
/// A non-finite averaged gradient makes every rank throw NumericFault with
/// a loss-scale diagnostic.
StepOutcome train_step(collective::Communicator& comm, RankState& state, const RunConfig& cfg,
                       const data::Batch& batch, double lr, std::uint64_t dropout_seed);

struct TrainResult {
  std::vector<EpochRecord> history;
  model::Parameters best_params;   // working weights of the best validation epoch (rank 0)
  model::Parameters final_params;  // working weights after the last epoch
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Generates or loads the shots named by `cfg`, then standardizes every
/// split with training-split statistics.
data::Dataset prepare_data(const RunConfig& cfg);

/// Full training loop for one rank. `on_epoch` runs on rank 0 after every
/// epoch, so partial history survives a later failure.
TrainResult run_training(const RunConfig& cfg, const data::Dataset& dataset, collective::Communicator& comm,
                         const EpochCallback& on_epoch = {});

/// Runs every rank of `cfg.cluster` on threads and returns rank 0's result.
TrainResult train_in_process(const RunConfig& cfg, const data::Dataset& dataset, const EpochCallback& on_epoch = {});

collective::CommOptions comm_options(const RunConfig& cfg);

/// Header line and row formatting of metrics.csv
/// (epoch,loss,val_auc,lr,wall_ms,overflow_count).
std::string metrics_header();
std::string metrics_row(const EpochRecord& r);

}  // namespace halfsync::trainer
