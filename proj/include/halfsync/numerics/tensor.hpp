#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "halfsync/numerics/precision.hpp"

namespace halfsync::numerics {

/// Counters filled by rounding operations.
struct RoundingStats {
  std::size_t overflow = 0;   // finite input became +-Inf
  std::size_t underflow = 0;  // non-zero input became zero
  std::size_t zeros = 0;      // elements equal to zero after rounding

  RoundingStats& operator+=(const RoundingStats& o) {
    overflow += o.overflow;
    underflow += o.underflow;
    zeros += o.zeros;
    return *this;
  }
};

/// Rounds `values` in place to p and tallies what happened.
RoundingStats round_in_place(std::span<double> values, Precision p);

/// Dense row-major array tagged with the precision its values live at.
///
/// Values are held as doubles but every element is exactly representable at
/// `precision()`; constructors round on entry to keep that true.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  Tensor(std::vector<std::size_t> shape, Precision precision);
  /// Takes ownership of `values` and rounds them to `precision`.
  Tensor(std::vector<std::size_t> shape, std::vector<double> values, Precision precision);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  Precision precision() const noexcept { return precision_; }
  std::span<const double> values() const noexcept { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  Precision precision_ = Precision::fp32;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

}  // namespace halfsync::numerics
