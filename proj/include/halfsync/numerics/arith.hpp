#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "halfsync/numerics/precision.hpp"

namespace halfsync::numerics {

/// Scalar arithmetic at a fixed math width with a separate accumulator width.
///
/// Every value leaving an operation is rounded to Math. Running sums are kept
/// at Acc and only rounded to Math when read out through `finish`. Sums are
/// formed strictly left to right so results are reproducible.
template <Precision Math, Precision Acc>
struct Arith {
  static constexpr Precision math = Math;
  static constexpr Precision accumulator = Acc;

  static double r(double x) noexcept { return round_as<Math>(x); }
  static double racc(double x) noexcept { return round_as<Acc>(x); }

  static double mul(double a, double b) noexcept { return r(a * b); }
  static double add(double a, double b) noexcept { return r(a + b); }
  static double sub(double a, double b) noexcept { return r(a - b); }

  /// acc + round_math(a*b), rounded at accumulator width.
  static double fma_acc(double acc, double a, double b) noexcept { return racc(acc + mul(a, b)); }
  static double add_acc(double acc, double v) noexcept { return racc(acc + v); }
  static double finish(double acc) noexcept { return r(acc); }

  /// Accumulator-width dot product of a[0..n) with b[0..n*stride) stepping by stride.
  static double dot_acc(double acc, const double* a, const double* b, std::size_t n,
                        std::size_t stride = 1) noexcept {
    for (std::size_t k = 0; k < n; ++k) {
      acc = fma_acc(acc, a[k], b[k * stride]);
    }
    return acc;
  }

  static double sigmoid(double x) noexcept { return r(1.0 / (1.0 + std::exp(-x))); }
  static double tanh(double x) noexcept { return r(std::tanh(x)); }
  static double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }
};

namespace detail {

template <Precision M, class F>
decltype(auto) dispatch_acc(Precision acc, F&& f) {
  switch (acc) {
    case Precision::fp16:
      return std::forward<F>(f)(Arith<M, Precision::fp16>{});
    case Precision::fp32:
      return std::forward<F>(f)(Arith<M, Precision::fp32>{});
    case Precision::fp64:
      break;
  }
  return std::forward<F>(f)(Arith<M, Precision::fp64>{});
}

}  // namespace detail

/// Calls f(Arith<math, accumulator>{}) for a runtime policy.
template <class F>
decltype(auto) dispatch_arith(Precision math, Precision accumulator, F&& f) {
  switch (math) {
    case Precision::fp16:
      return detail::dispatch_acc<Precision::fp16>(accumulator, std::forward<F>(f));
    case Precision::fp32:
      return detail::dispatch_acc<Precision::fp32>(accumulator, std::forward<F>(f));
    case Precision::fp64:
      break;
  }
  return detail::dispatch_acc<Precision::fp64>(accumulator, std::forward<F>(f));
}

template <class F>
decltype(auto) dispatch_arith(const PrecisionPolicy& policy, F&& f) {
  return dispatch_arith(policy.math, policy.accumulator, std::forward<F>(f));
}

}  // namespace halfsync::numerics
