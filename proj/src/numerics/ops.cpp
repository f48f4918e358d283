#include "halfsync/numerics/ops.hpp"

#include <vector>

#include "halfsync/errors.hpp"
#include "halfsync/numerics/arith.hpp"

namespace halfsync::numerics {

Tensor cast(const Tensor& t, Precision p, RoundingStats* stats) {
  std::vector<double> values(t.values().begin(), t.values().end());
  const RoundingStats s = round_in_place(values, p);
  if (stats != nullptr) {
    *stats += s;
  }
  return Tensor(t.shape(), std::move(values), p);
}

Tensor matmul(const Tensor& a, const Tensor& b, const PrecisionPolicy& policy) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul " + a.shape_string() + " x " + b.shape_string());
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  std::vector<double> out(m * n);
  dispatch_arith(policy, [&](auto arith) {
    using A = decltype(arith);
    // Operands enter at math width.
    std::vector<double> lhs(a.values().begin(), a.values().end());
    std::vector<double> rhs(b.values().begin(), b.values().end());
    for (double& v : lhs) {
      v = A::r(v);
    }
    for (double& v : rhs) {
      v = A::r(v);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] = A::finish(A::dot_acc(0.0, &lhs[i * k], &rhs[j], k, n));
      }
    }
  });
  return Tensor({m, n}, std::move(out), policy.math);
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const PrecisionPolicy& policy) {
  std::vector<double> out(a.size());
  dispatch_arith(policy, [&](auto arith) {
    using A = decltype(arith);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = A::r(a[i]);
      switch (op) {
        case ElementwiseOp::sigmoid:
          out[i] = A::sigmoid(x);
          break;
        case ElementwiseOp::tanh:
          out[i] = A::tanh(x);
          break;
        case ElementwiseOp::relu:
          out[i] = A::relu(x);
          break;
        default:
          throw DimensionError("binary elementwise op called with one operand");
      }
    }
  });
  return Tensor(a.shape(), std::move(out), policy.math);
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b, const PrecisionPolicy& policy) {
  if (a.shape() != b.shape()) {
    throw DimensionError("elementwise " + a.shape_string() + " vs " + b.shape_string());
  }
  std::vector<double> out(a.size());
  dispatch_arith(policy, [&](auto arith) {
    using A = decltype(arith);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = A::r(a[i]);
      const double y = A::r(b[i]);
      switch (op) {
        case ElementwiseOp::add:
          out[i] = A::add(x, y);
          break;
        case ElementwiseOp::mul:
          out[i] = A::mul(x, y);
          break;
        default:
          throw DimensionError("unary elementwise op called with two operands");
      }
    }
  });
  return Tensor(a.shape(), std::move(out), policy.math);
}

}  // namespace halfsync::numerics
