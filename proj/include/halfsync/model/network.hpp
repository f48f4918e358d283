#pragma once

#include <cstdint>
#include <vector>

#include "halfsync/model/params.hpp"
#include "halfsync/numerics/precision.hpp"
#include "halfsync/numerics/tensor.hpp"

namespace halfsync::model {

/// Per-layer activations kept for BPTT. All arrays are [batch][step][unit].
struct LayerCache {
  std::size_t in_dim = 0;
  std::vector<double> h_masked;   // h_{t-1} after the recurrent dropout mask
  std::vector<double> gates;      // activated gates, 4*hidden per step: i, f, g, o
  std::vector<double> cell;       // c_t
  std::vector<double> cell_tanh;  // tanh(c_t)
  std::vector<double> hidden;     // h_t
  std::vector<double> mask;       // [batch][hidden], fixed across steps
};

/// Everything bprop needs to reproduce the forward pass exactly.
struct ForwardCache {
  ModelConfig config;
  numerics::PrecisionPolicy policy;
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<double> input;  // [batch][step][feature], rounded to policy.math
  std::vector<LayerCache> layers;
  std::vector<double> fc_pre;  // [batch][step][fc_hidden]
  std::vector<double> fc_act;
  std::vector<double> output;  // [batch][step]
};

struct ForwardResult {
  numerics::Tensor outputs;  // [batch, steps, 1]
  ForwardCache cache;
};

/// Forward pass over a [batch, steps, feature_dim] tensor. Hidden and cell
/// state start at zero for every sequence. Recurrent dropout (one mask per
/// sequence and layer, drawn from `seed`) is applied only when train_mode is
/// set. Throws DimensionError on a feature mismatch and NumericFault naming
/// the first layer/timestep that produced a NaN.
ForwardResult fprop(const Parameters& params, const numerics::Tensor& batch,
                    const numerics::PrecisionPolicy& policy, bool train_mode, std::uint64_t seed);

/// alpha * mean(max(0, 1 - t*y)) + alpha * l2 * ||W||^2, evaluated in double.
/// `targets` holds +-1 and must have as many elements as `outputs`.
double hinge_loss(const numerics::Tensor& outputs, const numerics::Tensor& targets, double alpha, double l2,
                  const Parameters& params);

/// BPTT gradient of the alpha-scaled hinge loss (including the L2 term) at
/// policy.math. The result carries scale_applied = alpha. Hinge terms sitting
/// exactly on the margin contribute no gradient.
Gradients bprop(const Parameters& params, const ForwardCache& cache, const numerics::Tensor& targets, double alpha,
                const numerics::PrecisionPolicy& policy);

/// Divides the loss scale back out, in double precision.
Gradients descale(const Gradients& g);

}  // namespace halfsync::model
