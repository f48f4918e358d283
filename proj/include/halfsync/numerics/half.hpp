#pragma once

#include <cstdint>

namespace halfsync::numerics {

/// IEEE 754 binary16 value held as its raw bit pattern
/// (1 sign bit, 5 exponent bits, 10 mantissa bits).
struct Half {
  std::uint16_t bits = 0;

  friend bool operator==(Half, Half) = default;
};

inline constexpr double kHalfMax = 65504.0;
inline constexpr double kHalfMinNormal = 0x1p-14;
inline constexpr double kHalfMinSubnormal = 0x1p-24;
inline constexpr std::uint16_t kHalfPosInf = 0x7C00;
inline constexpr std::uint16_t kHalfNegInf = 0xFC00;

/// Rounds x to the nearest binary16 value, ties to even. Overflow gives a
/// signed infinity, tiny values go subnormal and then to signed zero. NaN
/// inputs stay NaN (quiet), keeping the top 10 payload bits.
Half encode_half(double x) noexcept;

/// Exact real value of any 16-bit pattern.
double decode_half(Half h) noexcept;

/// decode_half(encode_half(x)) without the round trip through the pattern.
double round_to_half(double x) noexcept;

inline bool is_nan(Half h) noexcept { return (h.bits & 0x7C00) == 0x7C00 && (h.bits & 0x03FF) != 0; }
inline bool is_inf(Half h) noexcept { return (h.bits & 0x7FFF) == 0x7C00; }

}  // namespace halfsync::numerics
