#pragma once

#include <cstddef>

#include "halfsync/collective/wire.hpp"
#include "halfsync/numerics/precision.hpp"

namespace halfsync::testing {

// Cost of one tree hop carrying `payload` elements at `dtype`.
inline double hop_ms(double latency_ms, double bandwidth, std::size_t payload, numerics::Precision dtype) {
  const double bytes = static_cast<double>(collective::kWireHeaderBytes + payload * numerics::byte_size(dtype));
  return latency_ms + bytes / bandwidth;
}

inline std::size_t depth_of(std::size_t n) {
  std::size_t d = 0;
  for (std::size_t span = 1; span < n; span *= 2) ++d;
  return d;
}

// Critical path of a reduce followed by a broadcast along a binomial tree of
// power-of-two size, when every rank resumes compute as soon as its broadcast lands: the deepest
// leaf sees the root's weights depth hops late and its gradient needs depth
// hops back.
inline double step_sync_ms(std::size_t n, double hop) { return 2.0 * static_cast<double>(depth_of(n)) * hop; }

// The root of an aligned reduce waits for the deepest subtree only.
inline double root_reduce_ms(std::size_t n, double hop) { return static_cast<double>(depth_of(n)) * hop; }

}  // namespace halfsync::testing
