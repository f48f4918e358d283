#pragma once

#include <vector>

#include "halfsync/model/params.hpp"
#include "halfsync/numerics/precision.hpp"

namespace halfsync::optim {

/// Momentum buffer H for SGD with momentum:
///   H_k = m * H_{k-1} - lr * dW
///   W_k = W_{k-1} + H_k
struct SgdMomentumState {
  std::vector<double> velocity;
  double momentum = 0.9;

  SgdMomentumState() = default;
  SgdMomentumState(std::size_t size, double m);
};

/// Applies one momentum step in place. Every intermediate is rounded to
/// `update`. `grads` must be descaled (scale_applied == 1) and congruent with
/// the parameters; NaN or Inf gradients raise NumericFault before anything
/// is modified.
void apply_update(model::Parameters& params, const model::Gradients& grads, SgdMomentumState& state, double lr,
                  numerics::Precision update);

/// Same step on raw vectors.
void apply_update(std::vector<double>& weights, const std::vector<double>& grads, SgdMomentumState& state,
                  double lr, numerics::Precision update);

}  // namespace halfsync::optim
