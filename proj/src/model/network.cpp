#include "halfsync/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "halfsync/errors.hpp"
#include "halfsync/numerics/arith.hpp"
#include "halfsync/util/rng.hpp"

namespace halfsync::model {

using numerics::PrecisionPolicy;
using numerics::Tensor;

namespace {

template <class A>
std::vector<double> rounded_copy(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = A::r(v[i]);
  }
  return out;
}

// Index of the first NaN, scanning step-major so the earliest timestep wins.
std::ptrdiff_t first_nan_step(const std::vector<double>& values, std::size_t batch, std::size_t steps,
                              std::size_t width) {
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double* row = &values[(b * steps + t) * width];
      for (std::size_t j = 0; j < width; ++j) {
        if (std::isnan(row[j])) {
          return static_cast<std::ptrdiff_t>(t);
        }
      }
    }
  }
  return -1;
}

void check_for_nan(const ForwardCache& c) {
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    const auto t = first_nan_step(c.layers[l].hidden, c.batch, c.steps, c.config.hidden);
    if (t >= 0) {
      throw NumericFault("NaN in lstm layer " + std::to_string(l) + " at timestep " + std::to_string(t));
    }
  }
  if (const auto t = first_nan_step(c.fc_act, c.batch, c.steps, c.config.fc_hidden); t >= 0) {
    throw NumericFault("NaN in fc layer at timestep " + std::to_string(t));
  }
  if (const auto t = first_nan_step(c.output, c.batch, c.steps, 1); t >= 0) {
    throw NumericFault("NaN in output head at timestep " + std::to_string(t));
  }
}

template <class A>
void forward_impl(const Parameters& params, ForwardCache& c, bool train_mode, std::uint64_t seed) {
  const ParamLayout& layout = params.layout;
  const ModelConfig& cfg = c.config;
  const std::size_t B = c.batch;
  const std::size_t T = c.steps;
  const std::size_t H = cfg.hidden;
  const std::size_t G = 4 * H;
  const std::vector<double> w = rounded_copy<A>(params.values);

  c.layers.resize(cfg.lstm_layers);
  for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
    LayerCache& lc = c.layers[l];
    lc.in_dim = l == 0 ? cfg.feature_dim : H;
    lc.h_masked.assign(B * T * H, 0.0);
    lc.gates.assign(B * T * G, 0.0);
    lc.cell.assign(B * T * H, 0.0);
    lc.cell_tanh.assign(B * T * H, 0.0);
    lc.hidden.assign(B * T * H, 0.0);
    lc.mask.assign(B * H, 1.0);
    if (train_mode && cfg.dropout_keep < 1.0) {
      util::Rng rng(util::Rng::derive(seed, l));
      const double keep_scale = A::r(1.0 / cfg.dropout_keep);
      for (double& m : lc.mask) {
        m = rng.bernoulli(cfg.dropout_keep) ? keep_scale : 0.0;
      }
    }

    const double* W = &w[layout.lstm_input(l).offset];
    const double* U = &w[layout.lstm_recurrent(l).offset];
    const double* bias = &w[layout.lstm_bias(l).offset];
    const std::size_t in = lc.in_dim;
    const std::vector<double>& below = l == 0 ? c.input : c.layers[l - 1].hidden;

    for (std::size_t b = 0; b < B; ++b) {
      const double* mask = &lc.mask[b * H];
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t row = b * T + t;
        const double* x = &below[row * in];
        double* hm = &lc.h_masked[row * H];
        for (std::size_t j = 0; j < H; ++j) {
          const double prev = t == 0 ? 0.0 : lc.hidden[(row - 1) * H + j];
          hm[j] = A::mul(prev, mask[j]);
        }
        double* gate = &lc.gates[row * G];
        for (std::size_t r = 0; r < G; ++r) {
          double acc = A::dot_acc(0.0, &W[r * in], x, in);
          acc = A::dot_acc(acc, &U[r * H], hm, H);
          const double z = A::finish(A::add_acc(acc, bias[r]));
          gate[r] = (r >= 2 * H && r < 3 * H) ? A::tanh(z) : A::sigmoid(z);
        }
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = gate[j];
          const double fg = gate[H + j];
          const double gg = gate[2 * H + j];
          const double og = gate[3 * H + j];
          const double c_prev = t == 0 ? 0.0 : lc.cell[(row - 1) * H + j];
          const double cell = A::add(A::mul(fg, c_prev), A::mul(ig, gg));
          const double tc = A::tanh(cell);
          lc.cell[row * H + j] = cell;
          lc.cell_tanh[row * H + j] = tc;
          lc.hidden[row * H + j] = A::mul(og, tc);
        }
      }
    }
  }

  const std::size_t F = cfg.fc_hidden;
  const double* Wfc = &w[layout.fc_weight().offset];
  const double* bfc = &w[layout.fc_bias().offset];
  const double* Wout = &w[layout.head_weight().offset];
  const double bout = w[layout.head_bias().offset];
  const std::vector<double>& top = c.layers.back().hidden;
  c.fc_pre.assign(B * T * F, 0.0);
  c.fc_act.assign(B * T * F, 0.0);
  c.output.assign(B * T, 0.0);
  for (std::size_t row = 0; row < B * T; ++row) {
    const double* h = &top[row * H];
    double* pre = &c.fc_pre[row * F];
    double* act = &c.fc_act[row * F];
    for (std::size_t j = 0; j < F; ++j) {
      pre[j] = A::finish(A::add_acc(A::dot_acc(0.0, &Wfc[j * H], h, H), bfc[j]));
      act[j] = A::relu(pre[j]);
    }
    c.output[row] = A::finish(A::add_acc(A::dot_acc(0.0, Wout, act, F), bout));
  }
}

template <class A>
std::vector<double> backward_impl(const Parameters& params, const ForwardCache& c, const Tensor& targets,
                                  double alpha) {
  const ParamLayout& layout = params.layout;
  const ModelConfig& cfg = c.config;
  const std::size_t B = c.batch;
  const std::size_t T = c.steps;
  const std::size_t H = cfg.hidden;
  const std::size_t G = 4 * H;
  const std::size_t F = cfg.fc_hidden;
  const std::vector<double> w = rounded_copy<A>(params.values);
  std::vector<double> g(w.size(), 0.0);  // running sums at accumulator width

  // dL/dy for the scaled mean hinge loss.
  const double coef = alpha / static_cast<double>(B * T);
  std::vector<double> dy(B * T, 0.0);
  for (std::size_t i = 0; i < B * T; ++i) {
    const double t = targets[i];
    if (1.0 - t * c.output[i] > 0.0) {
      dy[i] = A::r(-t * coef);
    }
  }

  // Head and FC layer.
  const std::size_t oWfc = layout.fc_weight().offset;
  const std::size_t obfc = layout.fc_bias().offset;
  const std::size_t oWout = layout.head_weight().offset;
  const std::size_t obout = layout.head_bias().offset;
  const std::vector<double>& top = c.layers.back().hidden;
  std::vector<double> d_above(B * T * H, 0.0);
  std::vector<double> da(F, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t tt = T; tt-- > 0;) {
      const std::size_t row = b * T + tt;
      const double d = dy[row];
      if (d == 0.0) {
        continue;
      }
      const double* act = &c.fc_act[row * F];
      const double* h = &top[row * H];
      for (std::size_t j = 0; j < F; ++j) {
        g[oWout + j] = A::fma_acc(g[oWout + j], d, act[j]);
      }
      g[obout] = A::add_acc(g[obout], d);
      for (std::size_t j = 0; j < F; ++j) {
        da[j] = c.fc_pre[row * F + j] > 0.0 ? A::mul(d, w[oWout + j]) : 0.0;
        if (da[j] == 0.0) {
          continue;
        }
        double* gw = &g[oWfc + j * H];
        for (std::size_t k = 0; k < H; ++k) {
          gw[k] = A::fma_acc(gw[k], da[j], h[k]);
        }
        g[obfc + j] = A::add_acc(g[obfc + j], da[j]);
      }
      double* dh = &d_above[row * H];
      for (std::size_t k = 0; k < H; ++k) {
        dh[k] = A::finish(A::dot_acc(0.0, da.data(), &w[oWfc + k], F, H));
      }
    }
  }

  // LSTM layers, top down, BPTT within each sequence.
  std::vector<double> dz(G, 0.0);
  std::vector<double> dh_next(H, 0.0);
  std::vector<double> dc_next(H, 0.0);
  for (std::size_t l = cfg.lstm_layers; l-- > 0;) {
    const LayerCache& lc = c.layers[l];
    const std::size_t in = lc.in_dim;
    const std::size_t oW = layout.lstm_input(l).offset;
    const std::size_t oU = layout.lstm_recurrent(l).offset;
    const std::size_t ob = layout.lstm_bias(l).offset;
    const std::vector<double>& below = l == 0 ? c.input : c.layers[l - 1].hidden;
    std::vector<double> d_below(l == 0 ? 0 : B * T * in, 0.0);

    for (std::size_t b = 0; b < B; ++b) {
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      std::fill(dc_next.begin(), dc_next.end(), 0.0);
      const double* mask = &lc.mask[b * H];
      for (std::size_t tt = T; tt-- > 0;) {
        const std::size_t row = b * T + tt;
        const double* gate = &lc.gates[row * G];
        for (std::size_t j = 0; j < H; ++j) {
          const double dh = A::add(d_above[row * H + j], dh_next[j]);
          const double ig = gate[j];
          const double fg = gate[H + j];
          const double gg = gate[2 * H + j];
          const double og = gate[3 * H + j];
          const double tc = lc.cell_tanh[row * H + j];
          const double c_prev = tt == 0 ? 0.0 : lc.cell[(row - 1) * H + j];
          const double d_o = A::mul(dh, tc);
          const double dc = A::add(dc_next[j], A::mul(A::mul(dh, og), A::sub(1.0, A::mul(tc, tc))));
          dc_next[j] = A::mul(dc, fg);
          dz[j] = A::mul(A::mul(dc, gg), A::mul(ig, A::sub(1.0, ig)));
          dz[H + j] = A::mul(A::mul(dc, c_prev), A::mul(fg, A::sub(1.0, fg)));
          dz[2 * H + j] = A::mul(A::mul(dc, ig), A::sub(1.0, A::mul(gg, gg)));
          dz[3 * H + j] = A::mul(d_o, A::mul(og, A::sub(1.0, og)));
        }
        const double* x = &below[row * in];
        const double* hm = &lc.h_masked[row * H];
        for (std::size_t r = 0; r < G; ++r) {
          const double d = dz[r];
          if (d == 0.0) {
            continue;
          }
          double* gw = &g[oW + r * in];
          for (std::size_t k = 0; k < in; ++k) {
            gw[k] = A::fma_acc(gw[k], d, x[k]);
          }
          double* gu = &g[oU + r * H];
          for (std::size_t k = 0; k < H; ++k) {
            gu[k] = A::fma_acc(gu[k], d, hm[k]);
          }
          g[ob + r] = A::add_acc(g[ob + r], d);
        }
        if (l > 0) {
          double* dx = &d_below[row * in];
          for (std::size_t k = 0; k < in; ++k) {
            dx[k] = A::finish(A::dot_acc(0.0, dz.data(), &w[oW + k], G, in));
          }
        }
        for (std::size_t k = 0; k < H; ++k) {
          const double dhm = A::finish(A::dot_acc(0.0, dz.data(), &w[oU + k], G, H));
          dh_next[k] = A::mul(dhm, mask[k]);
        }
      }
    }
    d_above = std::move(d_below);
  }

  for (double& v : g) {
    v = A::finish(v);
  }
  if (cfg.l2 > 0.0) {
    const double l2coef = A::r(2.0 * alpha * cfg.l2);
    for (const ParamBlock& blk : layout.blocks()) {
      if (!blk.is_weight()) {
        continue;
      }
      for (std::size_t i = blk.offset; i < blk.offset + blk.size(); ++i) {
        g[i] = A::add(g[i], A::mul(l2coef, w[i]));
      }
    }
  }
  return g;
}

}  // namespace

ForwardResult fprop(const Parameters& params, const Tensor& batch, const PrecisionPolicy& policy, bool train_mode,
                    std::uint64_t seed) {
  const ModelConfig& cfg = params.layout.config();
  if (batch.rank() != 3 || batch.dim(2) != cfg.feature_dim || batch.dim(0) == 0 || batch.dim(1) == 0) {
    throw DimensionError("fprop expects [batch, steps, " + std::to_string(cfg.feature_dim) + "], got " +
                         batch.shape_string());
  }
  ForwardCache cache;
  cache.config = cfg;
  cache.policy = policy;
  cache.batch = batch.dim(0);
  cache.steps = batch.dim(1);
  cache.input.assign(batch.values().begin(), batch.values().end());
  numerics::dispatch_arith(policy, [&](auto arith) {
    using A = decltype(arith);
    for (double& v : cache.input) {
      v = A::r(v);
    }
    forward_impl<A>(params, cache, train_mode, seed);
  });
  check_for_nan(cache);
  Tensor outputs({cache.batch, cache.steps, 1}, cache.output, policy.math);
  return ForwardResult{std::move(outputs), std::move(cache)};
}

double hinge_loss(const Tensor& outputs, const Tensor& targets, double alpha, double l2, const Parameters& params) {
  if (outputs.size() != targets.size() || outputs.size() == 0) {
    throw DimensionError("hinge_loss outputs " + outputs.shape_string() + " vs targets " + targets.shape_string());
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    sum += std::max(0.0, 1.0 - targets[i] * outputs[i]);
  }
  double loss = alpha * sum / static_cast<double>(outputs.size());
  if (l2 > 0.0) {
    loss += alpha * l2 * weight_norm_squared(params);
  }
  return loss;
}

Gradients bprop(const Parameters& params, const ForwardCache& cache, const Tensor& targets, double alpha,
                const PrecisionPolicy& policy) {
  if (!(params.layout.config() == cache.config)) {
    throw DimensionError("bprop: cache was produced for a different model configuration");
  }
  if (targets.size() != cache.batch * cache.steps) {
    throw DimensionError("bprop: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(cache.batch * cache.steps) + " outputs");
  }
  if (!(alpha > 0.0)) {
    throw NumericFault("loss scale must be positive");
  }
  Gradients g;
  g.scale_applied = alpha;
  numerics::dispatch_arith(policy, [&](auto arith) {
    using A = decltype(arith);
    g.values = backward_impl<A>(params, cache, targets, alpha);
  });
  return g;
}

Gradients descale(const Gradients& g) {
  Gradients out;
  out.scale_applied = 1.0;
  out.values.resize(g.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    out.values[i] = g.values[i] / g.scale_applied;
  }
  return out;
}

}  // namespace halfsync::model
