#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "halfsync/errors.hpp"
#include "halfsync/model/network.hpp"
#include "support/fd_oracle.hpp"
#include "support/model_fixtures.hpp"

using namespace halfsync;
using namespace halfsync::model;
using numerics::Precision;
using numerics::PrecisionPolicy;
using numerics::Tensor;

namespace {

const PrecisionPolicy kF64 = PrecisionPolicy::uniform(Precision::fp64);

ModelConfig paper_config(std::size_t layers) {
  ModelConfig c;
  c.feature_dim = 9;
  c.hidden = 200;
  c.lstm_layers = layers;
  c.fc_hidden = 200;
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("count_params closed form") {
  ModelConfig one = paper_config(1);
  const std::size_t h = 200;
  CHECK(4 * (9 * h + h * h + h) == 168000);
  CHECK(count_params(paper_config(2)) == 529201);
  CHECK(init_params(paper_config(2), 1).values.size() == 529201);
  CHECK(count_params(one) == 168000 + 200 * 200 + 200 + 201);

  const double n29 = static_cast<double>(count_params(paper_config(29)));
  CHECK(std::fabs(n29 - 9.2e6) / 9.2e6 < 0.01);
  const double n58 = static_cast<double>(count_params(paper_config(58)));
  CHECK(std::fabs(n58 - 18.2e6) / 18.2e6 < 0.02);
}

TEST_CASE("count_params agrees with a layout walk for random configs") {
  util::Rng rng(2024);
  for (int i = 0; i < 50; ++i) {
    ModelConfig c;
    c.feature_dim = static_cast<std::size_t>(rng.between(1, 40));
    c.hidden = static_cast<std::size_t>(rng.between(1, 64));
    c.lstm_layers = static_cast<std::size_t>(rng.between(1, 6));
    c.fc_hidden = static_cast<std::size_t>(rng.between(1, 64));
    const ParamLayout layout(c);
    std::size_t walked = 0;
    std::size_t expected_offset = 0;
    for (const ParamBlock& b : layout.blocks()) {
      REQUIRE(b.offset == expected_offset);  // contiguous, no gaps or overlaps
      expected_offset += b.size();
      walked += b.size();
    }
    REQUIRE(walked == layout.size());
    REQUIRE(walked == count_params(c));
  }
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.hidden = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.output_dim = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.dropout_keep = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.l2 = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("init_params is deterministic with unit forget biases") {
  ModelConfig c;
  c.feature_dim = 3;
  c.hidden = 5;
  c.lstm_layers = 2;
  c.fc_hidden = 4;
  const Parameters a = init_params(c, 42);
  const Parameters b = init_params(c, 42);
  const Parameters other = init_params(c, 43);
  CHECK(a.values == b.values);
  CHECK(a.values != other.values);
  for (std::size_t l = 0; l < c.lstm_layers; ++l) {
    const auto bias = a.block(a.layout.lstm_bias(l));
    for (std::size_t r = 0; r < 4 * c.hidden; ++r) {
      CHECK(bias[r] == ((r >= c.hidden && r < 2 * c.hidden) ? 1.0 : 0.0));
    }
  }
  for (const ParamBlock& blk : a.layout.blocks()) {
    if (!blk.is_weight()) {
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(blk.cols));
    for (double v : a.block(blk)) {
      CHECK(std::fabs(v) <= bound);
    }
  }
}

TEST_CASE("zero weights give zero outputs") {
  ModelConfig c;
  c.feature_dim = 2;
  c.hidden = 3;
  c.lstm_layers = 2;
  c.fc_hidden = 3;
  const Parameters p(c);
  util::Rng rng(1);
  const Tensor batch = fixtures::random_batch(rng, 2, 4, 2, Precision::fp32);
  const auto r = fprop(p, batch, PrecisionPolicy{}, false, 0);
  CHECK(r.outputs.shape() == std::vector<std::size_t>{2, 4, 1});
  for (double y : r.outputs.values()) {
    CHECK(y == 0.0);
  }
}

TEST_CASE("single step matches hand-evaluated LSTM equations") {
  ModelConfig c;
  c.feature_dim = 1;
  c.hidden = 1;
  c.lstm_layers = 1;
  c.fc_hidden = 1;
  c.seq_len = 1;
  Parameters p(c);
  const double wi = 0.5, wf = -0.3, wg = 0.8, wo = 0.2;
  const double bi = 0.1, bf = 1.0, bg = -0.2, bo = 0.05;
  const double wfc = 1.5, bfc = 0.1, wout = -2.0, bout = 0.3;
  auto W = p.block(p.layout.lstm_input(0));
  W[0] = wi, W[1] = wf, W[2] = wg, W[3] = wo;
  auto U = p.block(p.layout.lstm_recurrent(0));
  std::fill(U.begin(), U.end(), 0.7);  // irrelevant at t = 0, h_prev = 0
  auto b = p.block(p.layout.lstm_bias(0));
  b[0] = bi, b[1] = bf, b[2] = bg, b[3] = bo;
  p.block(p.layout.fc_weight())[0] = wfc;
  p.block(p.layout.fc_bias())[0] = bfc;
  p.block(p.layout.head_weight())[0] = wout;
  p.block(p.layout.head_bias())[0] = bout;

  const double x = 0.9;
  const double i = sigmoid(wi * x + bi);
  const double g = std::tanh(wg * x + bg);
  const double o = sigmoid(wo * x + bo);
  const double cell = i * g;  // forget gate multiplies c_prev = 0
  const double h = o * std::tanh(cell);
  const double a = std::max(0.0, wfc * h + bfc);
  const double y = wout * a + bout;

  const auto r = fprop(p, Tensor({1, 1, 1}, {x}, Precision::fp64), kF64, false, 0);
  CHECK(r.outputs[0] == doctest::Approx(y).epsilon(1e-14));
  CHECK(r.cache.layers[0].hidden[0] == doctest::Approx(h).epsilon(1e-14));
}

TEST_CASE("fp16 activations stay within the rounding bound after one step") {
  ModelConfig c;
  c.feature_dim = 3;
  c.hidden = 4;
  c.lstm_layers = 1;
  c.fc_hidden = 4;
  util::Rng rng(5);
  const Parameters p = init_params(c, 9);
  const Tensor batch = fixtures::random_batch(rng, 3, 1, 3, Precision::fp16, 0.5);
  const auto full = fprop(p, batch, PrecisionPolicy::uniform(Precision::fp32), false, 0);
  const auto half = fprop(p, batch, PrecisionPolicy::mixed_half(), false, 0);
  auto compare = [](const std::vector<double>& ref, const std::vector<double>& got) {
    double peak = 0.0;
    for (double v : ref) peak = std::max(peak, std::fabs(v));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(std::fabs(ref[i] - got[i]) <= 0x1p-10 * peak);
    }
  };
  compare(full.cache.layers[0].gates, half.cache.layers[0].gates);
  compare(full.cache.layers[0].cell, half.cache.layers[0].cell);
  compare(full.cache.layers[0].hidden, half.cache.layers[0].hidden);
}

TEST_CASE("hinge loss values") {
  ModelConfig c;
  c.feature_dim = 1;
  c.hidden = 1;
  c.fc_hidden = 1;
  const Parameters p(c);
  auto one = [](double v) { return Tensor({1, 1, 1}, {v}, Precision::fp64); };
  CHECK(hinge_loss(one(1.0), one(1.0), 1.0, 0.0, p) == 0.0);
  CHECK(hinge_loss(one(0.0), one(1.0), 10.0, 0.0, p) == 10.0);
  CHECK(hinge_loss(one(0.5), one(-1.0), 1.0, 0.0, p) == 1.5);
  CHECK_THROWS_AS(hinge_loss(one(0.5), Tensor({2}, {1.0, 1.0}, Precision::fp64), 1.0, 0.0, p), DimensionError);
}

TEST_CASE("bprop is flat where no hinge term is active") {
  ModelConfig c;
  c.feature_dim = 2;
  c.hidden = 3;
  c.fc_hidden = 2;
  Parameters p(c);
  p.block(p.layout.head_bias())[0] = 1.0;  // y == 1 everywhere
  util::Rng rng(3);
  const Tensor batch = fixtures::random_batch(rng, 2, 3, 2, Precision::fp32);
  const Tensor targets({2, 3, 1}, std::vector<double>(6, 1.0), Precision::fp32);
  const auto f = fprop(p, batch, PrecisionPolicy{}, true, 0);
  const Gradients g = bprop(p, f.cache, targets, 10.0, PrecisionPolicy{});
  CHECK(g.scale_applied == 10.0);
  for (double v : g.values) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("bprop matches central finite differences") {
  util::Rng rng(77);
  double worst = 0.0;
  std::size_t skipped = 0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const ModelConfig c = fixtures::random_tiny_config(rng);
    const std::size_t B = static_cast<std::size_t>(rng.between(1, 3));
    const Parameters p = init_params(c, 100 + trial);
    const Tensor batch = fixtures::random_batch(rng, B, c.seq_len, c.feature_dim, Precision::fp64);
    const Tensor targets = fixtures::random_targets(rng, B, c.seq_len);
    const oracle::FdReport r = oracle::finite_difference_check(p, batch, targets, rng.bernoulli(0.5) ? 10.0 : 1.0, 7 + trial);
    worst = std::max(worst, r.max_rel);
    skipped += r.skipped;
    checked += r.checked;
  }
  MESSAGE("fd: checked " << checked << " skipped " << skipped << " worst rel " << worst);
  CHECK(worst < 1e-6);
  CHECK(skipped * 100 < checked);
}

TEST_CASE("gradients are linear in the loss scale") {
  util::Rng rng(8);
  ModelConfig c;
  c.feature_dim = 3;
  c.hidden = 4;
  c.lstm_layers = 2;
  c.fc_hidden = 3;
  c.l2 = 0.001;
  const Parameters p = init_params(c, 4);
  const Tensor batch = fixtures::random_batch(rng, 2, 5, 3, Precision::fp32);
  const Tensor targets = fixtures::random_targets(rng, 2, 5);

  SUBCASE("power-of-two scale is exact in fp64") {
    const auto f = fprop(p, batch, kF64, false, 0);
    const Gradients g1 = bprop(p, f.cache, targets, 1.0, kF64);
    const Gradients g8 = descale(bprop(p, f.cache, targets, 8.0, kF64));
    CHECK(g8.scale_applied == 1.0);
    for (std::size_t i = 0; i < g1.values.size(); ++i) {
      REQUIRE(std::bit_cast<std::uint64_t>(g1.values[i]) == std::bit_cast<std::uint64_t>(g8.values[i]));
    }
  }
  SUBCASE("alpha = 10") {
    for (auto prec : {Precision::fp64, Precision::fp32}) {
      const PrecisionPolicy pol = PrecisionPolicy::uniform(prec);
      const double tol = prec == Precision::fp64 ? 1e-12 : 1e-6;
      const auto f = fprop(p, batch, pol, false, 0);
      const Gradients g1 = bprop(p, f.cache, targets, 1.0, pol);
      const Gradients g10 = descale(bprop(p, f.cache, targets, 10.0, pol));
      // Largest deviation relative to the largest gradient coordinate.
      double peak = 0.0;
      double gap = 0.0;
      for (std::size_t i = 0; i < g1.values.size(); ++i) {
        peak = std::max(peak, std::fabs(g1.values[i]));
        gap = std::max(gap, std::fabs(g10.values[i] - g1.values[i]));
      }
      MESSAGE(numerics::to_string(prec) << " alpha-linearity gap " << gap / peak);
      CHECK(gap / peak < tol);
    }
  }
}

TEST_CASE("descale divides out the loss scale in wide precision") {
  Gradients g{{10.0, -20.0}, 10.0};
  const Gradients d = descale(g);
  CHECK(d.values == std::vector<double>{1.0, -2.0});
  CHECK(d.scale_applied == 1.0);
  const Gradients same = descale(Gradients{{3.0}, 1.0});
  CHECK(same.values[0] == 3.0);
  // 60000 is an fp16 value; dividing in wide precision never passes through Inf.
  CHECK(numerics::representable(60000.0, Precision::fp16));
  CHECK(descale(Gradients{{60000.0}, 10.0}).values[0] == 6000.0);
}

TEST_CASE("dropout off and inference mode agree") {
  util::Rng rng(12);
  ModelConfig c;
  c.feature_dim = 2;
  c.hidden = 4;
  c.lstm_layers = 2;
  c.fc_hidden = 3;
  c.dropout_keep = 1.0;
  const Parameters p = init_params(c, 1);
  const Tensor batch = fixtures::random_batch(rng, 3, 6, 2, Precision::fp32);
  const auto train = fprop(p, batch, PrecisionPolicy{}, true, 99);
  const auto eval = fprop(p, batch, PrecisionPolicy{}, false, 0);
  CHECK(train.outputs == eval.outputs);

  ModelConfig dropped = c;
  dropped.dropout_keep = 0.5;
  Parameters pd(dropped);
  pd.values = p.values;
  const auto with_mask = fprop(pd, batch, PrecisionPolicy{}, true, 99);
  const auto without = fprop(pd, batch, PrecisionPolicy{}, false, 99);
  CHECK(with_mask.outputs != without.outputs);
  CHECK(without.outputs == eval.outputs);
}

TEST_CASE("output shape is [batch, steps, 1] for random configs") {
  util::Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    const ModelConfig c = fixtures::random_tiny_config(rng);
    const std::size_t B = static_cast<std::size_t>(rng.between(1, 4));
    const std::size_t T = static_cast<std::size_t>(rng.between(1, 7));
    const Parameters p = init_params(c, i);
    const auto r = fprop(p, fixtures::random_batch(rng, B, T, c.feature_dim, Precision::fp32), PrecisionPolicy{},
                         true, i);
    REQUIRE(r.outputs.shape() == std::vector<std::size_t>{B, T, 1});
  }
}

TEST_CASE("fprop and bprop error paths") {
  ModelConfig c;
  c.feature_dim = 2;
  c.hidden = 2;
  c.fc_hidden = 2;
  Parameters p = init_params(c, 0);
  util::Rng rng(1);
  CHECK_THROWS_AS(fprop(p, fixtures::random_batch(rng, 1, 2, 3, Precision::fp32), PrecisionPolicy{}, false, 0),
                  DimensionError);

  const Tensor batch = fixtures::random_batch(rng, 1, 3, 2, Precision::fp32);
  const auto f = fprop(p, batch, PrecisionPolicy{}, false, 0);
  ModelConfig other = c;
  other.hidden = 3;
  CHECK_THROWS_AS(bprop(init_params(other, 0), f.cache, fixtures::random_targets(rng, 1, 3), 1.0, PrecisionPolicy{}),
                  DimensionError);
  CHECK_THROWS_AS(bprop(p, f.cache, fixtures::random_targets(rng, 2, 3), 1.0, PrecisionPolicy{}), DimensionError);

  p.block(p.layout.lstm_input(0))[0] = std::nan("");
  try {
    fprop(p, batch, PrecisionPolicy{}, false, 0);
    FAIL("expected a numeric fault");
  } catch (const NumericFault& e) {
    CHECK(std::string(e.what()) == "NaN in lstm layer 0 at timestep 0");
  }
}

TEST_CASE("finite-difference oracle flags a corrupted gradient") {
  util::Rng rng(13);
  ModelConfig c;
  c.feature_dim = 2;
  c.hidden = 3;
  c.fc_hidden = 3;
  c.seq_len = 4;
  Parameters p = init_params(c, 21);
  const Tensor batch = fixtures::random_batch(rng, 2, 4, 2, Precision::fp64);
  const Tensor targets = fixtures::random_targets(rng, 2, 4);
  const auto f = fprop(p, batch, kF64, true, 0);
  const Gradients g = bprop(p, f.cache, targets, 10.0, kF64);
  std::size_t best = 0;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (std::fabs(g.values[i]) > std::fabs(g.values[best])) best = i;
  }
  const double w0 = p.values[best];
  const double eps = 1e-5 * std::max(1.0, std::fabs(w0));
  p.values[best] = w0 + eps;
  const double lp = hinge_loss(fprop(p, batch, kF64, true, 0).outputs, targets, 10.0, 0.0, p);
  p.values[best] = w0 - eps;
  const double lm = hinge_loss(fprop(p, batch, kF64, true, 0).outputs, targets, 10.0, 0.0, p);
  CHECK(oracle::fd_relative_error(g.values[best], lp, lm, eps) < 1e-8);
  const double corrupted = oracle::fd_relative_error(g.values[best] * 1.001, lp, lm, eps);
  CHECK(corrupted > 5e-4);
  CHECK(corrupted < 2e-3);
}
