#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "halfsync/collective/transport.hpp"
#include "halfsync/collective/wire.hpp"
#include "halfsync/numerics/precision.hpp"

namespace halfsync::collective {

/// Cost model and limits for a communicator.
struct CommOptions {
  /// Virtual clock: message arrival = send time + latency + bytes / bandwidth,
  /// compute advances only through advance(). Ignored (wall clock used) when
  /// the transport carries no send times.
  bool virtual_clock = true;
  double latency_ms = 0.01;
  double bandwidth_bytes_per_ms = 1.0e7;
  /// Per-receive limit before a collective fails.
  long timeout_ms = 300000;

  /// Defaults, with timeout_ms taken from HALFSYNC_TIMEOUT_MS when set.
  static CommOptions from_env();
};

/// What the last collective cost on this rank.
struct SyncTiming {
  std::size_t bytes = 0;     // payload bytes sent plus received
  double elapsed_ms = 0.0;   // clock advance across the call
  std::size_t rounds = 0;    // tree rounds in which this rank communicated
};

/// Per-rank delay before a rank contributes to a partial collection.
/// +Inf means the rank never contributes.
struct StragglerModel {
  std::vector<double> delay_ms;

  double delay(int rank) const {
    return static_cast<std::size_t>(rank) < delay_ms.size() ? delay_ms[static_cast<std::size_t>(rank)] : 0.0;
  }
};

struct PartialResult {
  std::size_t contributors = 0;
  std::vector<int> ranks;  // contributing ranks, ascending
};

/// Rank-local endpoint of the collectives. All collectives are blocking and
/// must be entered by every rank in the same order; rank 0 is the root.
class Communicator {
 public:
  Communicator(Transport& transport, CommOptions options);

  int rank() const { return transport_.rank(); }
  int size() const { return transport_.size(); }
  const CommOptions& options() const { return options_; }

  double now_ms() const;
  /// Charges local compute time to the virtual clock.
  void advance(double ms);

  /// Binomial-tree broadcast from `root`. Every rank ends with the root's
  /// values rounded to `dtype`, bit-identical.
  void broadcast(std::span<double> buffer, numerics::Precision dtype, int root = 0);

  /// Binomial-tree reduce to rank 0 then broadcast. Partial sums are formed at
  /// `accumulator` and re-rounded to `dtype` before every transmission.
  void allreduce_sum(std::span<double> buffer, numerics::Precision dtype, numerics::Precision accumulator);

  /// Flat gather to rank 0 that proceeds once ceil(fraction * N) contributions
  /// (its own included) have arrived. The sum over contributors, in the same
  /// pairing order as allreduce_sum, replaces `buffer` on every rank.
  PartialResult partial_allreduce(std::span<double> buffer, numerics::Precision dtype,
                                  numerics::Precision accumulator, double fraction,
                                  const StragglerModel& stragglers = {});

  const SyncTiming& last_timing() const { return timing_; }
  /// Messages discarded because they belonged to an earlier collective.
  std::size_t stale_dropped() const { return stale_dropped_; }

 private:
  struct Received {
    int source;
    WireMessage msg;
    double arrival_ms;
  };

  std::uint32_t tag(std::uint32_t phase) const { return (seq_ << 4) | phase; }
  void begin();
  void finish(double start_ms);
  void send(int dest, const WireMessage& msg);
  Received expect(int source, std::uint32_t tag);
  std::optional<Received> expect_any(std::uint32_t tag, Clock::time_point deadline);
  Received admit(Envelope env);
  bool stale(std::uint32_t t) const { return (t >> 4) < seq_; }
  void check_count(const Received& r, std::size_t expected) const;

  Transport& transport_;
  CommOptions options_;
  bool virtual_;
  double clock_ms_ = 0.0;
  Clock::time_point epoch_;
  std::uint32_t seq_ = 0;
  std::vector<Received> pending_;
  SyncTiming timing_;
  std::size_t stale_dropped_ = 0;
};

/// Elementwise sum of per-rank contributions in the binomial pairing order
/// used by allreduce_sum; absent ranks (nullptr) are skipped.
std::vector<double> binomial_tree_sum(const std::vector<const std::vector<double>*>& contributions,
                                      numerics::Precision dtype, numerics::Precision accumulator);

/// Runs `body` on `workers` threads, each holding a Communicator over a shared
/// in-process hub. The first failure aborts the hub so peers stop waiting,
/// and is rethrown once every thread has joined.
void run_in_process(int workers, const CommOptions& options, const std::function<void(Communicator&)>& body);

}  // namespace halfsync::collective
