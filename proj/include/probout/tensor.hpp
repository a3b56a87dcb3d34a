#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probout/errors.hpp"

namespace probout {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major n-dimensional array. The element count always equals the
/// product of the extents; every extent is positive.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(checked_volume(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_volume(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static BasicTensor vector(std::initializer_list<T> values) {
    return BasicTensor({values.size()}, std::vector<T>(values));
  }

  static BasicTensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
    return BasicTensor({rows, cols}, std::vector<T>(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  const T& operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  /// Same data, new extents; volumes must agree.
  BasicTensor reshaped(Shape shape) const& { return BasicTensor(std::move(shape), data_); }
  BasicTensor reshaped(Shape shape) && { return BasicTensor(std::move(shape), std::move(data_)); }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const BasicTensor& other) const = default;

 private:
  static std::size_t checked_volume(const Shape& shape) {
    for (auto extent : shape) {
      if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape));
    }
    return shape_volume(shape);
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;
using IndexTensor = BasicTensor<std::int32_t>;

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (const T& v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// result[i] = dot(W[i,:], v) + b[i]
template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& weights, const BasicTensor<T>& input,
                      const BasicTensor<T>& bias) {
  if (weights.rank() != 2 || input.rank() != 1 || bias.rank() != 1 ||
      weights.dim(1) != input.dim(0) || weights.dim(0) != bias.dim(0)) {
    throw DimensionError("affine: W " + shape_string(weights.shape()) + ", v " +
                         shape_string(input.shape()) + ", b " + shape_string(bias.shape()));
  }
  const std::size_t rows = weights.dim(0);
  const std::size_t cols = weights.dim(1);
  BasicTensor<T> out({rows});
  const T* w = weights.data().data();
  const T* v = input.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    T acc = bias[i];
    const T* row = w + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace probout
