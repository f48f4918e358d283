#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "halfsync/numerics/half.hpp"

namespace halfsync::numerics {

/// Floating-point storage/compute width. The enumerator values double as the
/// wire dtype codes.
enum class Precision : std::uint8_t { fp16 = 0, fp32 = 1, fp64 = 2 };

constexpr std::size_t byte_size(Precision p) noexcept {
  switch (p) {
    case Precision::fp16:
      return 2;
    case Precision::fp32:
      return 4;
    case Precision::fp64:
      return 8;
  }
  return 0;
}

std::string_view to_string(Precision p) noexcept;
/// Accepts "fp16", "fp32", "fp64" (also "half", "float", "double").
Precision parse_precision(std::string_view name);

template <Precision P>
inline double round_as(double x) noexcept {
  if constexpr (P == Precision::fp16) {
    return round_to_half(x);
  } else if constexpr (P == Precision::fp32) {
    return static_cast<double>(static_cast<float>(x));
  } else {
    return x;
  }
}

/// Round-to-nearest-even to the given width.
inline double round_to(double x, Precision p) noexcept {
  switch (p) {
    case Precision::fp16:
      return round_as<Precision::fp16>(x);
    case Precision::fp32:
      return round_as<Precision::fp32>(x);
    case Precision::fp64:
      return x;
  }
  return x;
}

/// True when x is exactly representable at p (NaN counts as representable).
bool representable(double x, Precision p) noexcept;

/// Precision of each stage of training. All four are independent.
struct PrecisionPolicy {
  Precision math = Precision::fp32;         // matmul and elementwise, fprop and bprop
  Precision sync = Precision::fp32;         // gradients and weights on the wire
  Precision update = Precision::fp32;       // optimizer arithmetic and master weights
  Precision accumulator = Precision::fp32;  // running sums inside reductions and matmul

  static PrecisionPolicy uniform(Precision p) { return {p, p, p, p}; }
  /// fp16 math and wire, fp32 update and accumulation.
  static PrecisionPolicy mixed_half() {
    return {Precision::fp16, Precision::fp16, Precision::fp32, Precision::fp32};
  }

  friend bool operator==(const PrecisionPolicy&, const PrecisionPolicy&) = default;
};

std::string describe(const PrecisionPolicy& policy);

}  // namespace halfsync::numerics
