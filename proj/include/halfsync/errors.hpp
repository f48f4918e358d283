#pragma once

#include <stdexcept>
#include <string>

namespace halfsync {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or layout disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf observed where finite values are required.
class NumericFault : public Error {
 public:
  using Error::Error;
};

/// Transport failure, timeout or protocol violation, attributed to a rank.
class CommError : public Error {
 public:
  CommError(int rank, const std::string& what)
      : Error("rank " + std::to_string(rank) + ": " + what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

/// Invalid configuration (unknown key, bad value, inconsistent sizes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable data (bad shot file, empty split).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace halfsync
