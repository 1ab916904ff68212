#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hdpan/errors.hpp"

namespace hdpan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

// Dense row-major n-dimensional array.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_dims();
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Number of elements per leading-dimension entry.
  std::size_t row_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  BasicTensor reshaped(Shape shape) const& {
    return BasicTensor(std::move(shape), data_);
  }
  BasicTensor reshaped(Shape shape) && {
    return BasicTensor(std::move(shape), std::move(data_));
  }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void check_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

// Trainable tensor with its accumulated gradient.
template <typename T>
struct BasicParam {
  BasicTensor<T> value;
  BasicTensor<T> grad;

  explicit BasicParam(BasicTensor<T> v) : value(std::move(v)), grad(value.shape()) {}
  explicit BasicParam(Shape shape) : value(shape), grad(shape) {}

  void zero_grad() { grad.fill(T{0}); }
};

using Param = BasicParam<float>;

// Gathers rows (leading-dimension entries) of `src` into a new tensor.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& src, std::span<const std::size_t> rows) {
  Shape shape = src.shape();
  shape[0] = rows.size();
  BasicTensor<T> out(shape);
  const std::size_t stride = src.row_size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(src.data() + rows[r] * stride, stride, out.data() + r * stride);
  }
  return out;
}

// Concatenates two tensors along the leading dimension.
template <typename T>
BasicTensor<T> concat_rows(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.row_size() != b.row_size()) throw ShapeError("concat_rows: row sizes differ");
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<T> data(a.values().begin(), a.values().end());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return BasicTensor<T>(shape, std::move(data));
}

}  // namespace hdpan
