#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "halfsync/data/shots.hpp"
#include "halfsync/errors.hpp"
#include "halfsync/util/rng.hpp"

namespace halfsync::data {

using util::Rng;

namespace {

// Stream ids for Rng::derive.
constexpr std::uint64_t kLabelStream = 1;
constexpr std::uint64_t kChannelStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kTestLabelStream = 4;
constexpr std::uint64_t kShotStream = 1'000'000;
constexpr std::uint64_t kTestShotStream = 2'000'000;

struct ChannelShape {
  std::vector<double> offset;
  std::vector<double> scale;
};

struct Regime {
  double noise;
  double ramp;
  double offset_shift;
};

std::vector<bool> pick_disruptive(std::size_t n, std::size_t count, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<bool> flag(n, false);
  for (std::size_t i = 0; i < count; ++i) flag[order[i]] = true;
  return flag;
}

Shot make_shot(const GeneratorParams& p, const ChannelShape& shape, const Regime& regime, std::uint64_t id,
               bool disruptive, Rng rng, std::map<std::uint64_t, std::uint32_t>& leads) {
  Shot s;
  s.id = id;
  s.length = static_cast<std::uint32_t>(rng.between(p.min_length, p.max_length));
  const std::size_t d = p.channels;
  std::vector<double> value(static_cast<std::size_t>(s.length) * d, 0.0);

  std::uint32_t lead = 0;
  std::vector<bool> ramped(d, false);
  if (disruptive) {
    s.t_disrupt = s.length - 1;
    lead = static_cast<std::uint32_t>(rng.between(p.lead_min_ms, std::min(p.lead_max_ms, *s.t_disrupt)));
    leads[id] = lead;
    std::vector<std::size_t> chans(d);
    std::iota(chans.begin(), chans.end(), std::size_t{0});
    rng.shuffle(chans);
    for (std::size_t k = 0; k < p.precursor_channels; ++k) ramped[chans[k]] = true;
  }

  const double innovation = regime.noise * std::sqrt(1.0 - p.ar_coefficient * p.ar_coefficient);
  for (std::size_t c = 0; c < d; ++c) {
    const double period = rng.uniform(200.0, 800.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double e = regime.noise * rng.normal();
    for (std::uint32_t t = 0; t < s.length; ++t) {
      if (t > 0) e = p.ar_coefficient * e + innovation * rng.normal();
      double x = e + p.drift_scale * std::sin(2.0 * std::numbers::pi * t / period + phase);
      if (ramped[c]) {
        const double start = static_cast<double>(*s.t_disrupt) - lead;
        if (t >= start) x += regime.ramp * (t - start) / lead;
      }
      value[t * d + c] = shape.offset[c] + regime.offset_shift * shape.scale[c] + shape.scale[c] * x;
    }
  }
  s.signals.assign(value.begin(), value.end());
  return s;
}

}  // namespace

void GeneratorParams::validate() const {
  if (shots < 2) throw ConfigError("generator needs at least 2 shots");
  if (channels < 1) throw ConfigError("generator needs at least 1 channel");
  if (min_length <= 30) throw ConfigError("minimum shot length must exceed 30 ms");
  if (min_length > max_length) throw ConfigError("minimum shot length exceeds maximum");
  if (!(disruptive_fraction > 0.0 && disruptive_fraction < 1.0)) {
    throw ConfigError("disruptive fraction must lie in (0, 1)");
  }
  if (lead_min_ms < 50 || lead_min_ms > lead_max_ms) {
    throw ConfigError("precursor lead range must satisfy 50 <= min <= max");
  }
  if (min_length <= lead_min_ms) {
    throw ConfigError("minimum shot length must exceed the minimum precursor lead");
  }
  if (precursor_channels < 1 || precursor_channels > channels) {
    throw ConfigError("precursor channel count must lie in [1, channels]");
  }
  if (!(noise_scale >= 0.0) || !(std::fabs(ar_coefficient) < 1.0)) {
    throw ConfigError("noise scale must be >= 0 and |AR coefficient| < 1");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  const auto nd = static_cast<std::size_t>(std::lround(static_cast<double>(shots) * disruptive_fraction));
  if (nd == 0 || nd == shots) {
    throw ConfigError("disruptive fraction leaves one class empty");
  }
}

Dataset generate(const GeneratorParams& p, std::uint64_t seed) {
  p.validate();
  Dataset ds;
  ds.channels = p.channels;

  ChannelShape shape;
  Rng crng(Rng::derive(seed, kChannelStream));
  for (std::size_t c = 0; c < p.channels; ++c) {
    shape.offset.push_back(crng.uniform(-2.0, 2.0));
    shape.scale.push_back(crng.uniform(0.5, 2.0));
  }

  const auto nd = static_cast<std::size_t>(std::lround(static_cast<double>(p.shots) * p.disruptive_fraction));
  const std::vector<bool> flag = pick_disruptive(p.shots, nd, Rng(Rng::derive(seed, kLabelStream)));
  const Regime base{p.noise_scale, p.ramp_amplitude, 0.0};
  std::vector<Shot> all;
  all.reserve(p.shots);
  for (std::size_t i = 0; i < p.shots; ++i) {
    all.push_back(make_shot(p, shape, base, i, flag[i], Rng(Rng::derive(seed, kShotStream + i)), ds.precursor_lead));
  }

  // Stratified split: the same validation share of each class.
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < p.shots; ++i) (flag[i] ? pos : neg).push_back(i);
  Rng srng(Rng::derive(seed, kSplitStream));
  srng.shuffle(pos);
  srng.shuffle(neg);
  std::vector<bool> in_val(p.shots, false);
  for (auto* cls : {&pos, &neg}) {
    const auto take = static_cast<std::size_t>(std::lround(static_cast<double>(cls->size()) * p.validation_fraction));
    for (std::size_t k = 0; k < take; ++k) in_val[(*cls)[k]] = true;
  }
  for (std::size_t i = 0; i < p.shots; ++i) {
    (in_val[i] ? ds.validation : ds.train).push_back(std::move(all[i]));
  }

  if (p.test_shots > 0) {
    const auto tnd =
        static_cast<std::size_t>(std::lround(static_cast<double>(p.test_shots) * p.disruptive_fraction));
    const std::vector<bool> tflag = pick_disruptive(p.test_shots, tnd, Rng(Rng::derive(seed, kTestLabelStream)));
    const Regime shifted{p.noise_scale * p.test_noise_multiplier, p.ramp_amplitude * p.test_ramp_multiplier,
                         p.test_offset_shift};
    for (std::size_t j = 0; j < p.test_shots; ++j) {
      ds.test.push_back(
          make_shot(p, shape, shifted, p.shots + j, tflag[j], Rng(Rng::derive(seed, kTestShotStream + j)), ds.precursor_lead));
    }
  }
  return ds;
}

std::vector<double> shot_targets(const Shot& shot, std::uint32_t horizon_ms) {
  std::vector<double> t(shot.length, -1.0);
  if (shot.t_disrupt) {
    const std::uint32_t td = *shot.t_disrupt;
    const std::uint32_t from = td > horizon_ms ? td - horizon_ms : 0;
    for (std::uint32_t k = from; k <= td && k < shot.length; ++k) t[k] = 1.0;
  }
  return t;
}

}  // namespace halfsync::data
