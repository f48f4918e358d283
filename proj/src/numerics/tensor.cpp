#include "halfsync/numerics/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "halfsync/errors.hpp"

namespace halfsync::numerics {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

RoundingStats round_in_place(std::span<double> values, Precision p) {
  RoundingStats stats;
  for (double& v : values) {
    const double r = round_to(v, p);
    if (std::isinf(r) && std::isfinite(v)) {
      ++stats.overflow;
    }
    if (r == 0.0) {
      ++stats.zeros;
      if (v != 0.0) {
        ++stats.underflow;
      }
    }
    v = r;
  }
  return stats;
}

Tensor::Tensor(std::vector<std::size_t> shape, Precision precision)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0), precision_(precision) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values, Precision precision)
    : shape_(std::move(shape)), data_(std::move(values)), precision_(precision) {
  if (data_.size() != element_count(shape_)) {
    throw DimensionError("tensor " + shape_string() + " given " + std::to_string(data_.size()) + " values");
  }
  round_in_place(data_, precision_);
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) {
    throw DimensionError("2-index access on tensor " + shape_string());
  }
  return data_.at(i * shape_[1] + j);
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  if (rank() != 3) {
    throw DimensionError("3-index access on tensor " + shape_string());
  }
  return data_.at((i * shape_[1] + j) * shape_[2] + k);
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i != 0) {
      s += "x";
    }
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace halfsync::numerics
