#pragma once

#include <cstdint>
#include <vector>

#include "halfsync/model/params.hpp"
#include "halfsync/numerics/tensor.hpp"
#include "halfsync/util/rng.hpp"

namespace fixtures {

inline halfsync::model::ModelConfig random_tiny_config(halfsync::util::Rng& rng) {
  halfsync::model::ModelConfig c;
  c.feature_dim = static_cast<std::size_t>(rng.between(1, 3));
  c.hidden = static_cast<std::size_t>(rng.between(1, 4));
  c.lstm_layers = static_cast<std::size_t>(rng.between(1, 2));
  c.fc_hidden = static_cast<std::size_t>(rng.between(1, 4));
  c.seq_len = static_cast<std::size_t>(rng.between(1, 5));
  c.l2 = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.01) : 0.0;
  c.dropout_keep = rng.bernoulli(0.5) ? rng.uniform(0.6, 1.0) : 1.0;
  return c;
}

inline halfsync::numerics::Tensor random_batch(halfsync::util::Rng& rng, std::size_t batch, std::size_t steps,
                                               std::size_t features, halfsync::numerics::Precision p,
                                               double scale = 1.0) {
  std::vector<double> v(batch * steps * features);
  for (double& x : v) {
    x = scale * rng.normal();
  }
  return halfsync::numerics::Tensor({batch, steps, features}, std::move(v), p);
}

inline halfsync::numerics::Tensor random_targets(halfsync::util::Rng& rng, std::size_t batch, std::size_t steps) {
  std::vector<double> v(batch * steps);
  for (double& x : v) {
    x = rng.bernoulli(0.5) ? 1.0 : -1.0;
  }
  return halfsync::numerics::Tensor({batch, steps, 1}, std::move(v), halfsync::numerics::Precision::fp16);
}

}  // namespace fixtures
