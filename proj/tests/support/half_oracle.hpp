#pragma once

// Brute-force binary16 rounding oracle, independent of the library codec:
// builds the value of every positive pattern from the format definition and
// picks the nearest one, breaking ties toward the even pattern.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline double half_value_from_format(std::uint16_t bits) {
  const int e = (bits >> 10) & 0x1F;
  const int m = bits & 0x3FF;
  double v = e == 0 ? m * std::pow(2.0, -24) : (1.0 + m / 1024.0) * std::pow(2.0, e - 15);
  return (bits & 0x8000) ? -v : v;
}

inline const std::vector<double>& positive_half_grid() {
  // Index == pattern for 0x0000..0x7BFF, then 2^16 standing in for +Inf.
  static const std::vector<double> grid = [] {
    std::vector<double> g;
    for (std::uint32_t b = 0; b <= 0x7BFF; ++b) {
      g.push_back(half_value_from_format(static_cast<std::uint16_t>(b)));
    }
    g.push_back(65536.0);
    return g;
  }();
  return grid;
}

/// Pattern of the nearest binary16 to finite x.
inline std::uint16_t nearest_half_bits(double x) {
  const auto& g = positive_half_grid();
  const double a = std::fabs(x);
  const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  auto it = std::lower_bound(g.begin(), g.end(), a);
  std::uint32_t idx;
  if (it == g.end()) {
    idx = 0x7C00;
  } else if (*it == a || it == g.begin()) {
    idx = static_cast<std::uint32_t>(it - g.begin());
  } else {
    const auto hi = static_cast<std::uint32_t>(it - g.begin());
    const std::uint32_t lo = hi - 1;
    const double dlo = a - g[lo];
    const double dhi = g[hi] - a;
    if (dlo < dhi) {
      idx = lo;
    } else if (dhi < dlo) {
      idx = hi;
    } else {
      idx = (lo % 2 == 0) ? lo : hi;
    }
  }
  return static_cast<std::uint16_t>(sign | idx);
}

inline double nearest_half_value(double x) {
  const std::uint16_t b = nearest_half_bits(x);
  if ((b & 0x7FFF) == 0x7C00) {
    return std::copysign(INFINITY, x);
  }
  return half_value_from_format(b);
}

}  // namespace oracle
