#include "halfsync/trainer/trainer.hpp"

#include <fmt/format.h>

#include <cmath>
#include <mutex>

#include "halfsync/errors.hpp"
#include "halfsync/eval/inference.hpp"
#include "halfsync/model/network.hpp"
#include "halfsync/util/log.hpp"
#include "halfsync/util/rng.hpp"

namespace halfsync::trainer {

using collective::Communicator;
using numerics::Precision;
using util::Rng;

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch) {
  return Rng::derive(Rng::derive(seed, kShuffleStream), epoch);
}

std::uint64_t dropout_seed(std::uint64_t seed, std::size_t epoch, std::size_t step, int rank) {
  return Rng::derive(Rng::derive(Rng::derive(seed, kDropoutStream), epoch), step * 4096 + static_cast<std::size_t>(rank));
}

// Broadcast payload: parameters followed by one status slot (0 ok, 1 fault).
void broadcast_params(Communicator& comm, RankState& state, const RunConfig& cfg, double status) {
  std::vector<double> buf(state.working.values.size() + 1);
  if (comm.rank() == 0) {
    std::copy(state.master->values.begin(), state.master->values.end(), buf.begin());
    buf.back() = status;
  }
  comm.broadcast(buf, cfg.precision.sync);
  std::copy(buf.begin(), buf.end() - 1, state.working.values.begin());
  if (buf.back() != 0.0) {
    throw NumericFault(fmt::format(
        "non-finite averaged gradient after descaling by alpha={}; the {} wire overflowed, lower train.alpha",
        cfg.alpha, numerics::to_string(cfg.precision.sync)));
  }
}

}  // namespace

collective::CommOptions comm_options(const RunConfig& cfg) {
  collective::CommOptions o = collective::CommOptions::from_env();
  o.virtual_clock = cfg.timing.virtual_clock;
  o.latency_ms = cfg.timing.latency_ms;
  o.bandwidth_bytes_per_ms = cfg.timing.bandwidth_bytes_per_ms;
  return o;
}

RankState init_rank_state(Communicator& comm, const RunConfig& cfg) {
  RankState state(cfg.model);
  if (comm.rank() == 0) {
    model::Parameters p = model::init_params(cfg.model, Rng::derive(cfg.seed, kInitStream));
    for (double& v : p.values) v = numerics::round_to(v, cfg.precision.update);
    state.master = std::move(p);
    state.momentum = optim::SgdMomentumState(state.working.values.size(), cfg.momentum);
  }
  broadcast_params(comm, state, cfg, 0.0);
  return state;
}

StepOutcome train_step(Communicator& comm, RankState& state, const RunConfig& cfg, const data::Batch& batch,
                       double lr, std::uint64_t dseed) {
  const auto& policy = cfg.precision;
  StepOutcome out;
  const auto fwd = model::fprop(state.working, batch.features, policy, true, dseed);
  out.loss = model::hinge_loss(fwd.outputs, batch.targets, cfg.alpha, cfg.model.l2, state.working) / cfg.alpha;
  const model::Gradients grads = model::bprop(state.working, fwd.cache, batch.targets, cfg.alpha, policy);

  std::vector<double> buf = grads.values;
  out.wire = numerics::round_in_place(buf, policy.sync);
  if (cfg.fraction < 1.0) {
    out.contributors = comm.partial_allreduce(buf, policy.sync, policy.accumulator, cfg.fraction).contributors;
  } else {
    comm.allreduce_sum(buf, policy.sync, policy.accumulator);
    out.contributors = static_cast<std::size_t>(comm.size());
  }

  double status = 0.0;
  if (comm.rank() == 0) {
    model::Gradients avg;
    avg.values.resize(buf.size());
    avg.scale_applied = cfg.alpha;
    const double count = static_cast<double>(out.contributors);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      avg.values[i] = buf[i] / count;
      if (!std::isfinite(avg.values[i])) ++bad;
    }
    avg = model::descale(avg);
    if (bad > 0) {
      spdlog::error("{} averaged gradient coordinates are non-finite at alpha={}", bad, cfg.alpha);
      status = 1.0;
    } else {
      optim::apply_update(*state.master, avg, *state.momentum, lr, policy.update);
    }
  }
  broadcast_params(comm, state, cfg, status);
  return out;
}

data::Dataset prepare_data(const RunConfig& cfg) {
  data::Dataset ds;
  if (cfg.data_dir.empty()) {
    ds = data::generate(cfg.generator, cfg.data_seed);
  } else {
    const auto load = [&](const std::string& name, std::vector<data::Shot>& into, bool required) {
      const std::string path = cfg.data_dir + "/" + name;
      try {
        auto f = data::load_shots(path);
        if (ds.channels != 0 && f.channels != ds.channels) {
          throw DataError("'" + path + "' has " + std::to_string(f.channels) + " channels, expected " +
                          std::to_string(ds.channels));
        }
        ds.channels = f.channels;
        into = std::move(f.shots);
      } catch (const DataError&) {
        if (required) throw;
      }
    };
    load("train.shots", ds.train, true);
    load("val.shots", ds.validation, true);
    load("test.shots", ds.test, false);
  }
  if (ds.train.empty()) throw DataError("training split is empty");
  if (ds.validation.empty()) throw DataError("validation split is empty");
  if (ds.channels != cfg.model.feature_dim) {
    throw ConfigError("data has " + std::to_string(ds.channels) + " channels but model.feature_dim is " +
                      std::to_string(cfg.model.feature_dim));
  }
  const data::ChannelStats stats = data::compute_stats(ds.train, ds.channels);
  data::normalize(ds.train, stats);
  data::normalize(ds.validation, stats);
  data::normalize(ds.test, stats);
  return ds;
}

TrainResult run_training(const RunConfig& cfg, const data::Dataset& dataset, Communicator& comm,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  if (static_cast<std::size_t>(comm.size()) != cfg.cluster.workers) {
    throw ConfigError("communicator has " + std::to_string(comm.size()) + " ranks, cluster.n is " +
                      std::to_string(cfg.cluster.workers));
  }
  if (dataset.channels != cfg.model.feature_dim) {
    throw ConfigError("dataset channels do not match model.feature_dim");
  }
  const auto seq_len = static_cast<std::uint32_t>(cfg.model.seq_len);
  const auto workers = static_cast<std::size_t>(comm.size());
  const auto rank = static_cast<std::size_t>(comm.rank());

  RankState state = init_rank_state(comm, cfg);
  TrainResult result{{}, state.working, state.working, 0, false};
  double best_auc = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double start = comm.now_ms();
    const double lr = cfg.schedule.rate_for_epoch(epoch, workers);
    const data::EpochPlan plan =
        data::shard_epoch(dataset.train, seq_len, cfg.batch_size, workers, epoch_shuffle_seed(cfg.seed, epoch));
    double loss_sum = 0.0;
    numerics::RoundingStats wire;
    const auto& mine = plan.ranks[rank];
    for (std::size_t step = 0; step < mine.size(); ++step) {
      const data::Batch batch = data::make_batch(dataset.train, dataset.channels, mine[step], seq_len, cfg.horizon_ms);
      comm.advance(cfg.timing.batch_ms);
      const StepOutcome s = train_step(comm, state, cfg, batch, lr, dropout_seed(cfg.seed, epoch, step, comm.rank()));
      loss_sum += s.loss;
      wire += s.wire;
    }

    std::vector<double> totals{loss_sum, static_cast<double>(mine.size()), static_cast<double>(wire.overflow),
                               static_cast<double>(wire.underflow), static_cast<double>(wire.zeros)};
    comm.allreduce_sum(totals, Precision::fp64, Precision::fp64);

    std::vector<double> verdict{0.0, 0.0};
    if (comm.rank() == 0) {
      const double auc =
          eval::evaluate_shots(state.working, dataset.validation, dataset.channels, cfg.precision, seq_len).roc.auc;
      verdict[0] = auc;
      if (auc > best_auc) {
        best_auc = auc;
        since_best = 0;
        result.best_params = state.working;
        result.best_epoch = epoch + 1;
      } else {
        ++since_best;
      }
      verdict[1] = cfg.patience > 0 && since_best >= cfg.patience ? 1.0 : 0.0;
    }
    comm.broadcast(verdict, Precision::fp64);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = totals[0] / totals[1];
    rec.val_auc = verdict[0];
    rec.lr = lr;
    rec.wall_ms = comm.now_ms() - start;
    rec.overflow_count = static_cast<std::size_t>(totals[2]);
    rec.underflow_count = static_cast<std::size_t>(totals[3]);
    rec.wire_zero_count = static_cast<std::size_t>(totals[4]);
    result.history.push_back(rec);
    if (comm.rank() == 0) {
      spdlog::info("epoch {} loss {:.6f} val_auc {:.4f} lr {:.3g} wall_ms {:.1f} overflow {}", rec.epoch, rec.loss,
                   rec.val_auc, rec.lr, rec.wall_ms, rec.overflow_count);
      if (on_epoch) on_epoch(rec);
    }
    if (verdict[1] != 0.0) {
      result.stopped_early = true;
      break;
    }
  }
  result.final_params = state.working;
  return result;
}

TrainResult train_in_process(const RunConfig& cfg, const data::Dataset& dataset, const EpochCallback& on_epoch) {
  cfg.validate();
  std::optional<TrainResult> root;
  collective::run_in_process(static_cast<int>(cfg.cluster.workers), comm_options(cfg), [&](Communicator& comm) {
    TrainResult r = run_training(cfg, dataset, comm, comm.rank() == 0 ? on_epoch : EpochCallback{});
    if (comm.rank() == 0) root = std::move(r);
  });
  return std::move(*root);
}

std::string metrics_header() { return "epoch,loss,val_auc,lr,wall_ms,overflow_count"; }

std::string metrics_row(const EpochRecord& r) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}", r.epoch, r.loss, r.val_auc, r.lr, r.wall_ms,
                     r.overflow_count);
}

}  // namespace halfsync::trainer
