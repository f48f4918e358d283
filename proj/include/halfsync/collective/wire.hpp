#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "halfsync/numerics/precision.hpp"
#include "halfsync/numerics/tensor.hpp"

namespace halfsync::collective {

/// One collective payload as it travels between ranks.
///
/// Serialized layout, all little-endian:
///   u32 tag | u8 dtype (0 fp16, 1 fp32, 2 fp64) | u64 count | count * size(dtype) payload bytes
/// fp16 elements are raw binary16 patterns.
struct WireMessage {
  std::uint32_t tag = 0;
  numerics::Precision dtype = numerics::Precision::fp32;
  std::uint64_t count = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

inline constexpr std::size_t kWireHeaderBytes = 4 + 1 + 8;

/// Rounds `values` to `dtype` and packs them. Rounding outcomes go to `stats`.
WireMessage pack(std::uint32_t tag, std::span<const double> values, numerics::Precision dtype,
                 numerics::RoundingStats* stats = nullptr);

/// Decodes the payload to doubles (exact: every pattern widens losslessly).
std::vector<double> unpack(const WireMessage& msg);

std::vector<std::uint8_t> serialize(const WireMessage& msg);

/// Throws DataError on a truncated buffer, an unknown dtype code or a payload
/// whose length disagrees with count.
WireMessage deserialize(std::span<const std::uint8_t> bytes);

}  // namespace halfsync::collective
