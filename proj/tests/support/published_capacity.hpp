#pragma once

#include <cstddef>

#include "halfsync/numerics/precision.hpp"

namespace halfsync::testing {

// Published device-capacity rows at 16 GB: precision, batch, layers, params.
struct PublishedCapacity {
  numerics::Precision precision;
  std::size_t batch;
  std::size_t layers;
  double params;
};

inline constexpr PublishedCapacity kPublishedCapacity[] = {
    {numerics::Precision::fp64, 256, 15, 4.6e6},  {numerics::Precision::fp32, 256, 29, 9.2e6},
    {numerics::Precision::fp16, 256, 58, 18.2e6}, {numerics::Precision::fp64, 64, 58, 18.2e6},
    {numerics::Precision::fp32, 64, 118, 36.3e6}, {numerics::Precision::fp16, 64, 234, 72.1e6},
};

// Published per-iteration estimate: 18.2e6 params, batch 256, 2-byte dtype
// over 6.25 GB/s is about 1500 ms and 9.4 GB.
inline constexpr double kPublishedIterationSeconds = 1.5;
inline constexpr double kPublishedGradientGB = 9.4;

}  // namespace halfsync::testing
