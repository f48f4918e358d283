#include "halfsync/optim/sgd.hpp"

#include <cmath>
#include <string>

#include "halfsync/errors.hpp"

namespace halfsync::optim {

SgdMomentumState::SgdMomentumState(std::size_t size, double m) : velocity(size, 0.0), momentum(m) {
  if (!(m >= 0.0 && m < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
}

void apply_update(std::vector<double>& weights, const std::vector<double>& grads, SgdMomentumState& state,
                  double lr, numerics::Precision update) {
  if (weights.size() != grads.size() || weights.size() != state.velocity.size()) {
    throw DimensionError("apply_update: " + std::to_string(weights.size()) + " weights, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.velocity.size()) +
                         " momentum entries");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericFault("non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  const double m = numerics::round_to(state.momentum, update);
  const double rate = numerics::round_to(lr, update);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double g = numerics::round_to(grads[i], update);
    const double decayed = numerics::round_to(m * state.velocity[i], update);
    const double step = numerics::round_to(rate * g, update);
    const double h = numerics::round_to(decayed - step, update);
    state.velocity[i] = h;
    weights[i] = numerics::round_to(weights[i] + h, update);
  }
}

void apply_update(model::Parameters& params, const model::Gradients& grads, SgdMomentumState& state, double lr,
                  numerics::Precision update) {
  if (grads.scale_applied != 1.0) {
    throw NumericFault("apply_update needs descaled gradients (scale " + std::to_string(grads.scale_applied) + ")");
  }
  apply_update(params.values, grads.values, state, lr, update);
}

}  // namespace halfsync::optim
