#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "statenet/errors.hpp"

namespace statenet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor. Images use [N, C, H, W]. The engine trains in
// float; double instantiations exist for gradient checks.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0});
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-4 element access.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(T value);
  // In-place reshape; throws ShapeError if element counts differ.
  void reshape_inplace(const Shape& new_shape);
  bool all_finite() const;

  bool operator==(const BasicTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& t, const Shape& new_shape);

// Standard matrix product of rank-2 tensors.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// C = op(A) * op(B) (+ C when accumulate). Row-major raw buffers; op is a
// transpose when the flag is set. A is m x k after op, B is k x n after op.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

// Lowers a [N, C, H, W] batch into a [C*9, N*H*W] matrix for a 3x3 kernel
// with stride 1 and padding 1. Column (n*H + y)*W + x holds the receptive
// field of output pixel (y, x) of sample n; row c*9 + ky*3 + kx indexes the
// kernel tap. Padded taps are zero.
template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input);

// Adjoint of im2col: scatter-adds a [C*9, N*H*W] matrix back into an image
// batch of the given shape.
template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& image_shape);

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  std::vector<To> out(t.values().begin(), t.values().end());
  return BasicTensor<To>(t.shape(), std::move(out));
}

}  // namespace statenet
