#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "modist/error.hpp"

namespace modist {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Dense row-major tensor with value semantics.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ConfigError("tensor data size does not match shape " + shape_str(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int a, int b) { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  const T& at(int a, int b) const { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  T& at(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  const T& at(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  T& at(int a, int b, int c, int d) {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  const T& at(int a, int b, int c, int d) const {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  void reshape(Shape shape) {
    if (shape_numel(shape) != data_.size()) {
      throw ConfigError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace modist
