#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "halfsync/data/shots.hpp"
#include "halfsync/errors.hpp"
#include "halfsync/util/log.hpp"

namespace halfsync::data {

namespace {

constexpr char kMagic[4] = {'S', 'H', 'O', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint32_t kNoDisruption = 0xFFFFFFFFu;

template <typename U>
void put(std::ostream& out, U v) {
  char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>(static_cast<std::uint8_t>(v >> (8 * i)));
  out.write(b, sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::string& path) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) {
    throw DataError("shot file '" + path + "' is truncated");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_shots(const std::string& path, std::size_t channels, const std::vector<Shot>& shots) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write shot file '" + path + "'");
  out.write(kMagic, 4);
  put<std::uint16_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(channels));
  for (const Shot& s : shots) {
    if (s.signals.size() != static_cast<std::size_t>(s.length) * channels) {
      throw DimensionError("shot " + std::to_string(s.id) + " holds " + std::to_string(s.signals.size()) +
                           " samples, expected " + std::to_string(static_cast<std::size_t>(s.length) * channels));
    }
    put<std::uint64_t>(out, s.id);
    put<std::uint8_t>(out, s.disruptive() ? 1 : 0);
    put<std::uint32_t>(out, s.t_disrupt.value_or(kNoDisruption));
    put<std::uint32_t>(out, s.length);
    for (float x : s.signals) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
  if (!out) throw DataError("failed writing shot file '" + path + "'");
}

ShotFile load_shots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open shot file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw DataError("'" + path + "' is not a shot file");
  }
  const auto version = get<std::uint16_t>(in, path);
  if (version != kVersion) {
    throw DataError("shot file '" + path + "' has unsupported version " + std::to_string(version));
  }
  ShotFile f;
  f.channels = get<std::uint32_t>(in, path);
  if (f.channels == 0) throw DataError("shot file '" + path + "' declares zero channels");
  while (in.peek() != std::char_traits<char>::eof()) {
    Shot s;
    s.id = get<std::uint64_t>(in, path);
    const auto flag = get<std::uint8_t>(in, path);
    const auto td = get<std::uint32_t>(in, path);
    s.length = get<std::uint32_t>(in, path);
    if (flag > 1 || (flag == 1) != (td != kNoDisruption) || (flag == 1 && td >= s.length)) {
      throw DataError("shot " + std::to_string(s.id) + " in '" + path + "' has an inconsistent disruption record");
    }
    if (flag == 1) s.t_disrupt = td;
    s.signals.resize(static_cast<std::size_t>(s.length) * f.channels);
    for (float& x : s.signals) x = std::bit_cast<float>(get<std::uint32_t>(in, path));
    f.shots.push_back(std::move(s));
  }
  return f;
}

ChannelStats compute_stats(const std::vector<Shot>& shots, std::size_t channels) {
  ChannelStats st;
  st.mean.assign(channels, 0.0);
  st.stddev.assign(channels, 0.0);
  std::size_t n = 0;
  for (const Shot& s : shots) {
    for (std::uint32_t t = 0; t < s.length; ++t) {
      for (std::size_t c = 0; c < channels; ++c) st.mean[c] += s.at(t, c, channels);
    }
    n += s.length;
  }
  if (n == 0) throw DataError("cannot compute channel statistics of an empty split");
  for (double& m : st.mean) m /= static_cast<double>(n);
  for (const Shot& s : shots) {
    for (std::uint32_t t = 0; t < s.length; ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double dv = s.at(t, c, channels) - st.mean[c];
        st.stddev[c] += dv * dv;
      }
    }
  }
  for (double& v : st.stddev) v = std::sqrt(v / static_cast<double>(n));
  return st;
}

void normalize(std::vector<Shot>& shots, const ChannelStats& stats) {
  const std::size_t channels = stats.mean.size();
  if (stats.stddev.size() != channels) throw DimensionError("channel statistics disagree in length");
  std::vector<float> mean(channels), divisor(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    mean[c] = static_cast<float>(stats.mean[c]);
    divisor[c] = static_cast<float>(stats.stddev[c]);
    if (!(divisor[c] > 0.0f)) {
      spdlog::warn("channel {} has zero variance; leaving it unscaled", c);
      divisor[c] = 1.0f;
    }
  }
  for (Shot& s : shots) {
    if (s.signals.size() != static_cast<std::size_t>(s.length) * channels) {
      throw DimensionError("shot " + std::to_string(s.id) + " does not have " + std::to_string(channels) +
                           " channels");
    }
    for (std::size_t i = 0; i < s.signals.size(); ++i) {
      const std::size_t c = i % channels;
      s.signals[i] = (s.signals[i] - mean[c]) / divisor[c];
    }
  }
}

}  // namespace halfsync::data
