#include "halfsync/numerics/half.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace halfsync::numerics {

namespace {

constexpr std::uint64_t kAbsMask = 0x7FFF'FFFF'FFFF'FFFFULL;
constexpr std::uint64_t kExpMask = 0x7FF0'0000'0000'0000ULL;
constexpr int kDropBits = 52 - 10;
constexpr std::uint64_t kDropMask = (1ULL << kDropBits) - 1;
constexpr std::uint64_t kHalfway = 1ULL << (kDropBits - 1);

// Smallest magnitude that rounds to infinity: halfway between 65504 and 2^16.
constexpr double kOverflowThreshold = 65520.0;

}  // namespace

Half encode_half(double x) noexcept {
  const std::uint64_t b = std::bit_cast<std::uint64_t>(x);
  const auto sign = static_cast<std::uint16_t>((b >> 48) & 0x8000);
  const std::uint64_t mag = b & kAbsMask;

  if (mag >= kExpMask) {
    if (mag == kExpMask) {
      return Half{static_cast<std::uint16_t>(sign | kHalfPosInf)};
    }
    const auto payload = static_cast<std::uint16_t>((mag >> kDropBits) & 0x03FF);
    return Half{static_cast<std::uint16_t>(sign | 0x7E00 | payload)};
  }

  const double a = std::bit_cast<double>(mag);
  if (a >= kOverflowThreshold) {
    return Half{static_cast<std::uint16_t>(sign | kHalfPosInf)};
  }
  if (a < kHalfMinNormal) {
    // Subnormal grid has spacing 2^-24; the scaled value is exact in double,
    // nearbyint rounds ties to even. A result of 1024 is the min normal 0x0400.
    const auto q = static_cast<std::uint16_t>(std::nearbyint(a * 0x1p24));
    return Half{static_cast<std::uint16_t>(sign | q)};
  }

  const int exponent = static_cast<int>(mag >> 52) - 1023;
  const std::uint64_t mantissa = mag & ((1ULL << 52) - 1);
  std::uint64_t kept = mantissa >> kDropBits;
  const std::uint64_t rest = mantissa & kDropMask;
  if (rest > kHalfway || (rest == kHalfway && (kept & 1U) != 0)) {
    ++kept;  // may carry into the exponent field, which is the right result
  }
  const auto bits = static_cast<std::uint16_t>((static_cast<std::uint64_t>(exponent + 15) << 10) + kept);
  return Half{static_cast<std::uint16_t>(sign | bits)};
}

double decode_half(Half h) noexcept {
  const bool negative = (h.bits & 0x8000) != 0;
  const int exponent = (h.bits >> 10) & 0x1F;
  const int mantissa = h.bits & 0x03FF;
  double v = 0.0;
  if (exponent == 0) {
    v = std::ldexp(static_cast<double>(mantissa), -24);
  } else if (exponent == 0x1F) {
    if (mantissa == 0) {
      v = std::numeric_limits<double>::infinity();
    } else {
      const std::uint64_t bits = kExpMask | (1ULL << 51) | (static_cast<std::uint64_t>(mantissa) << kDropBits);
      v = std::bit_cast<double>(bits);
    }
  } else {
    v = std::ldexp(static_cast<double>(1024 + mantissa), exponent - 25);
  }
  return negative ? -v : v;
}

double round_to_half(double x) noexcept {
  const double a = std::fabs(x);
  if (!(a < kOverflowThreshold)) {
    return std::isnan(x) ? x : std::copysign(std::numeric_limits<double>::infinity(), x);
  }
  if (a < kHalfMinNormal) {
    return std::copysign(std::nearbyint(a * 0x1p24) * 0x1p-24, x);
  }
  std::uint64_t b = std::bit_cast<std::uint64_t>(a);
  b += (kHalfway - 1) + ((b >> kDropBits) & 1U);
  b &= ~kDropMask;
  return std::copysign(std::bit_cast<double>(b), x);
}

}  // namespace halfsync::numerics
