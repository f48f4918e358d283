#include "halfsync/collective/wire.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "halfsync/errors.hpp"
#include "halfsync/numerics/half.hpp"

namespace halfsync::collective {

using numerics::Precision;

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(p[i]) << (8 * i);
  }
  return v;
}

Precision dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 0:
      return Precision::fp16;
    case 1:
      return Precision::fp32;
    case 2:
      return Precision::fp64;
    default:
      throw DataError("wire message has unknown dtype code " + std::to_string(code));
  }
}

}  // namespace

WireMessage pack(std::uint32_t tag, std::span<const double> values, Precision dtype,
                 numerics::RoundingStats* stats) {
  WireMessage msg;
  msg.tag = tag;
  msg.dtype = dtype;
  msg.count = values.size();
  msg.payload.reserve(values.size() * numerics::byte_size(dtype));
  numerics::RoundingStats local;
  for (double x : values) {
    double rounded = 0.0;
    switch (dtype) {
      case Precision::fp16: {
        const numerics::Half h = numerics::encode_half(x);
        put_le<std::uint16_t>(msg.payload, h.bits);
        rounded = numerics::decode_half(h);
        break;
      }
      case Precision::fp32: {
        const float f = static_cast<float>(x);
        put_le<std::uint32_t>(msg.payload, std::bit_cast<std::uint32_t>(f));
        rounded = f;
        break;
      }
      case Precision::fp64:
        put_le<std::uint64_t>(msg.payload, std::bit_cast<std::uint64_t>(x));
        rounded = x;
        break;
    }
    if (std::isfinite(x) && std::isinf(rounded)) ++local.overflow;
    if (x != 0.0 && rounded == 0.0) ++local.underflow;
    if (rounded == 0.0) ++local.zeros;
  }
  if (stats != nullptr) *stats += local;
  return msg;
}

std::vector<double> unpack(const WireMessage& msg) {
  const std::size_t width = numerics::byte_size(msg.dtype);
  if (msg.payload.size() != msg.count * width) {
    throw DataError("wire payload holds " + std::to_string(msg.payload.size()) + " bytes, expected " +
                    std::to_string(msg.count * width));
  }
  std::vector<double> out(msg.count);
  const std::uint8_t* p = msg.payload.data();
  for (std::size_t i = 0; i < out.size(); ++i, p += width) {
    switch (msg.dtype) {
      case Precision::fp16:
        out[i] = numerics::decode_half(numerics::Half{get_le<std::uint16_t>(p)});
        break;
      case Precision::fp32:
        out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
        break;
      case Precision::fp64:
        out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p));
        break;
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize(const WireMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeaderBytes + msg.payload.size());
  put_le<std::uint32_t>(out, msg.tag);
  out.push_back(static_cast<std::uint8_t>(msg.dtype));
  put_le<std::uint64_t>(out, msg.count);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

WireMessage deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireHeaderBytes) {
    throw DataError("wire message truncated: " + std::to_string(bytes.size()) + " bytes");
  }
  WireMessage msg;
  msg.tag = get_le<std::uint32_t>(bytes.data());
  msg.dtype = dtype_from_code(bytes[4]);
  msg.count = get_le<std::uint64_t>(bytes.data() + 5);
  const std::size_t body = bytes.size() - kWireHeaderBytes;
  const std::size_t width = numerics::byte_size(msg.dtype);
  if (msg.count > body / width || msg.count * width != body) {
    throw DataError("wire message declares " + std::to_string(msg.count) + " elements but carries " +
                    std::to_string(body) + " payload bytes");
  }
  msg.payload.assign(bytes.begin() + kWireHeaderBytes, bytes.end());
  return msg;
}

}  // namespace halfsync::collective
