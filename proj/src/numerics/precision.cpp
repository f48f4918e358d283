#include "halfsync/numerics/precision.hpp"

#include <cmath>

#include "halfsync/errors.hpp"

namespace halfsync::numerics {

std::string_view to_string(Precision p) noexcept {
  switch (p) {
    case Precision::fp16:
      return "fp16";
    case Precision::fp32:
      return "fp32";
    case Precision::fp64:
      return "fp64";
  }
  return "?";
}

Precision parse_precision(std::string_view name) {
  if (name == "fp16" || name == "half") {
    return Precision::fp16;
  }
  if (name == "fp32" || name == "float") {
    return Precision::fp32;
  }
  if (name == "fp64" || name == "double") {
    return Precision::fp64;
  }
  throw ConfigError("unknown precision '" + std::string(name) + "'");
}

bool representable(double x, Precision p) noexcept {
  if (std::isnan(x)) {
    return true;
  }
  return round_to(x, p) == x;
}

std::string describe(const PrecisionPolicy& policy) {
  std::string s = "math=";
  s += to_string(policy.math);
  s += " sync=";
  s += to_string(policy.sync);
  s += " update=";
  s += to_string(policy.update);
  s += " accumulator=";
  s += to_string(policy.accumulator);
  return s;
}

}  // namespace halfsync::numerics
