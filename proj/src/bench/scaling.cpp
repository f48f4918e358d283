#include "halfsync/bench/scaling.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <mutex>

#include "halfsync/collective/communicator.hpp"
#include "halfsync/errors.hpp"
#include "halfsync/util/plot.hpp"

namespace halfsync::bench {

void ScalingOptions::validate() const {
  if (workers.empty()) throw ConfigError("scaling: no worker counts");
  for (std::size_t n : workers) {
    if (n == 0) throw ConfigError("scaling: worker count must be at least 1");
    if (batches % n != 0) throw ConfigError(fmt::format("scaling: {} batches not divisible by N={}", batches, n));
  }
  if (!(latency_ms >= 0.0)) throw ConfigError("scaling: latency_ms must be >= 0");
  if (!(bandwidth_bytes_per_ms > 0.0)) throw ConfigError("scaling: bandwidth must be > 0");
  if (!(batch_ms >= 0.0)) throw ConfigError("scaling: batch_ms must be >= 0");
  if (payload == 0) throw ConfigError("scaling: payload must be at least 1 element");
}

namespace {

ScalingPoint measure(const ScalingOptions& o, std::size_t workers) {
  collective::CommOptions comm;
  comm.virtual_clock = true;
  comm.latency_ms = o.latency_ms;
  comm.bandwidth_bytes_per_ms = o.bandwidth_bytes_per_ms;

  ScalingPoint point;
  point.workers = workers;
  point.steps = o.batches / workers;
  std::mutex mu;

  collective::run_in_process(static_cast<int>(workers), comm, [&](collective::Communicator& c) {
    std::vector<double> grad(o.payload, 1.0);
    std::vector<double> params(o.payload, 0.5);

    // Aligned clocks: a lone allreduce seen from the root.
    const double a0 = c.now_ms();
    c.allreduce_sum(grad, o.sync, numerics::Precision::fp32);
    const double allreduce_ms = c.now_ms() - a0;

    // Training loop: initial weights, then compute / reduce / update / broadcast.
    c.broadcast(params, o.sync);
    const double start = c.now_ms();
    double batch_total = 0.0;
    double sync_total = 0.0;
    for (std::size_t s = 0; s < point.steps; ++s) {
      const double t0 = c.now_ms();
      c.advance(o.batch_ms);
      const double t1 = c.now_ms();
      std::fill(grad.begin(), grad.end(), 1.0);
      c.allreduce_sum(grad, o.sync, numerics::Precision::fp32);
      c.broadcast(params, o.sync);
      const double t2 = c.now_ms();
      batch_total += t1 - t0;
      sync_total += t2 - t1;
    }
    if (c.rank() == 0) {
      std::lock_guard lock(mu);
      const double steps = static_cast<double>(point.steps);
      point.t_allreduce_ms = allreduce_ms;
      point.t_batch_ms = batch_total / steps;
      point.t_sync_ms = sync_total / steps;
      point.t_epoch_ms = c.now_ms() - start;
    }
  });
  return point;
}

std::vector<TimingRecord> records(const std::vector<ScalingPoint>& points, numerics::Precision precision,
                                  bool isolated) {
  std::vector<TimingRecord> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back({p.workers, p.t_batch_ms, isolated ? p.t_allreduce_ms : p.t_sync_ms, precision});
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

}  // namespace

std::vector<ScalingPoint> run_strong_scaling(const ScalingOptions& options) {
  options.validate();
  std::vector<ScalingPoint> points;
  for (std::size_t n : options.workers) points.push_back(measure(options, n));
  return points;
}

std::vector<TimingRecord> step_records(const std::vector<ScalingPoint>& points, numerics::Precision precision) {
  return records(points, precision, false);
}

std::vector<TimingRecord> allreduce_records(const std::vector<ScalingPoint>& points, numerics::Precision precision) {
  return records(points, precision, true);
}

void write_scaling_csv(const std::string& path, const std::vector<ScalingPoint>& points) {
  auto out = open_out(path);
  out << "N,t_batch_ms,t_sync_ms,ratio\n";
  for (const auto& p : points) {
    const double ratio = p.t_batch_ms > 0.0 ? p.t_sync_ms / p.t_batch_ms : 0.0;
    out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", p.workers, p.t_batch_ms, p.t_sync_ms, ratio);
  }
}

void write_epoch_csv(const std::string& path, const std::vector<ScalingPoint>& points, const CostModel& model,
                     double batches) {
  auto out = open_out(path);
  out << "N,t_epoch_ms,predicted_ms\n";
  for (const auto& p : points) {
    out << fmt::format("{},{:.17g},{:.17g}\n", p.workers, p.t_epoch_ms,
                       predict_epoch_time(model, p.workers, batches));
  }
}

void write_scaling_plots(const std::string& dir, const std::vector<ScalingPoint>& points, const CostModel& model,
                         double batches) {
  util::Series measured{"measured", {}};
  util::Series predicted{"A + B log2 N fit", {}};
  util::Series ratio{"T_sync / T_batch", {}};
  for (const auto& p : points) {
    const double n = static_cast<double>(p.workers);
    measured.points.emplace_back(n, p.t_epoch_ms);
    predicted.points.emplace_back(n, predict_epoch_time(model, p.workers, batches));
    ratio.points.emplace_back(n, p.t_batch_ms > 0.0 ? p.t_sync_ms / p.t_batch_ms : 0.0);
  }
  const std::filesystem::path base(dir);
  util::write_svg((base / "epoch_time.svg").string(), {"Epoch time", "workers N", "T_epoch (ms)", true},
                  {measured, predicted});
  util::write_svg((base / "sync_ratio.svg").string(), {"Synchronization to computation", "workers N", "ratio", true},
                  {ratio});
}

}  // namespace halfsync::bench
