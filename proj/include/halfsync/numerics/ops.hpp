#pragma once

#include "halfsync/numerics/precision.hpp"
#include "halfsync/numerics/tensor.hpp"

namespace halfsync::numerics {

/// Rounds every element of t to p. Overflows and underflows are counted into
/// `stats` when given.
Tensor cast(const Tensor& t, Precision p, RoundingStats* stats = nullptr);

/// 2-D product a(m x k) * b(k x n). Each scalar product is rounded to
/// policy.math, summed left to right at policy.accumulator, and the sum is
/// rounded to policy.math. Throws DimensionError on mismatched inner dims.
Tensor matmul(const Tensor& a, const Tensor& b, const PrecisionPolicy& policy);

enum class ElementwiseOp { add, mul, sigmoid, tanh, relu };

/// Unary ops (sigmoid, tanh, relu).
Tensor elementwise(ElementwiseOp op, const Tensor& a, const PrecisionPolicy& policy);
/// Binary ops (add, mul); shapes must match exactly.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b, const PrecisionPolicy& policy);

}  // namespace halfsync::numerics
