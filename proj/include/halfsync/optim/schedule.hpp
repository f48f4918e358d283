#pragma once

#include <cstddef>

namespace halfsync::optim {

/// Worker-count-aware exponential learning-rate schedule.
///
/// The base rate shrinks as lambda0 / (1 + N/n), so `halving_workers` (n) is
/// the worker count at which it is halved. The effective base rate
/// lambda0'*N is then capped at `clip`. Per-epoch decay by `decay`^epoch is
/// applied after the cap.
struct LrSchedule {
  double base_lr = 0.0004;
  double decay = 0.8;
  double halving_workers = 100.0;
  double clip = 0.1;

  /// Throws ConfigError unless base_lr > 0, decay in (0, 1], n > 0, clip > 0.
  void validate() const;

  double base_rate(std::size_t workers) const;
  double rate_for_epoch(std::size_t epoch, std::size_t workers) const;

  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

}  // namespace halfsync::optim
