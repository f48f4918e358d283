#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace halfsync::data {

/// One discharge: `length` timesteps of `channels` fp32 samples, 1 ms apart.
struct Shot {
  std::uint64_t id = 0;
  std::optional<std::uint32_t> t_disrupt;  // set iff the shot ends in a disruption
  std::uint32_t length = 0;
  std::vector<float> signals;  // [length][channels], row-major

  bool disruptive() const { return t_disrupt.has_value(); }
  float at(std::size_t t, std::size_t c, std::size_t channels) const { return signals[t * channels + c]; }

  friend bool operator==(const Shot&, const Shot&) = default;
};

/// Synthetic disruption-dataset knobs.
///
/// Every channel is offset + scale * (AR(1) noise + slow sinusoidal drift).
/// Disruptive shots end at t_disrupt = length - 1 and carry a linear ramp on
/// a random subset of channels that starts `lead` ms before the disruption.
struct GeneratorParams {
  std::size_t shots = 400;
  std::size_t channels = 4;
  std::uint32_t min_length = 128;
  std::uint32_t max_length = 384;
  double disruptive_fraction = 0.10;
  std::uint32_t lead_min_ms = 50;
  std::uint32_t lead_max_ms = 150;
  std::size_t precursor_channels = 2;
  double noise_scale = 1.0;
  double ar_coefficient = 0.9;
  double drift_scale = 0.5;
  double ramp_amplitude = 3.0;
  double validation_fraction = 0.20;
  /// Held-out shots drawn with shifted parameters.
  std::size_t test_shots = 100;
  double test_noise_multiplier = 1.25;
  double test_ramp_multiplier = 0.8;
  double test_offset_shift = 0.5;

  /// Throws ConfigError when the parameters cannot produce a valid set.
  void validate() const;

  friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

struct Dataset {
  std::size_t channels = 0;
  std::vector<Shot> train;
  std::vector<Shot> validation;
  std::vector<Shot> test;
  /// Generator metadata, not persisted: precursor lead (ms) per disruptive shot id.
  std::map<std::uint64_t, std::uint32_t> precursor_lead;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Deterministic in `seed`. lround(shots * fraction) shots are disruptive;
/// the train/validation split is stratified by class.
Dataset generate(const GeneratorParams& params, std::uint64_t seed);

/// Per-timestep hinge targets: +1 for t in [t_disrupt - horizon, t_disrupt]
/// of a disruptive shot, -1 everywhere else.
std::vector<double> shot_targets(const Shot& shot, std::uint32_t horizon_ms);

/// Shot file: "SHOT", u16 version, u32 channels, then per shot u64 id,
/// u8 disruptive, u32 t_disrupt (0xFFFFFFFF when none), u32 length and
/// length * channels fp32 samples; all little-endian.
void save_shots(const std::string& path, std::size_t channels, const std::vector<Shot>& shots);

struct ShotFile {
  std::size_t channels = 0;
  std::vector<Shot> shots;
};

/// Throws DataError on a missing, truncated or inconsistent file.
ShotFile load_shots(const std::string& path);

/// Per-channel standardization statistics.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Mean and population standard deviation over every timestep of `shots`.
ChannelStats compute_stats(const std::vector<Shot>& shots, std::size_t channels);

/// (x - mean) / stddev in fp32. A zero-variance channel keeps divisor 1 and
/// is reported once.
void normalize(std::vector<Shot>& shots, const ChannelStats& stats);

}  // namespace halfsync::data
