#include "statenet/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace statenet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape_));
  return shape_[axis];
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void BasicTensor<T>::reshape_inplace(const Shape& new_shape) {
  if (shape_size(new_shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(new_shape));
  shape_ = new_shape;
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& t, const Shape& new_shape) {
  BasicTensor<T> out = t;
  out.reshape_inplace(new_shape);
  return out;
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMat>;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::Map<RowMat> cm(c, mi, ni);
  if (k == 0) {
    if (!accumulate) cm.setZero();
    return;
  }
  ConstMap am(a, trans_a ? ki : mi, trans_a ? mi : ki);
  ConstMap bm(b, trans_b ? ni : ki, trans_b ? ki : ni);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate)
      cm.noalias() += lhs * rhs;
    else
      cm.noalias() = lhs * rhs;
  };
  if (trans_a && trans_b)
    run(am.transpose(), bm.transpose());
  else if (trans_a)
    run(am.transpose(), bm);
  else if (trans_b)
    run(am, bm.transpose());
  else
    run(am, bm);
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul expects rank-2 operands, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner dimension mismatch: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  BasicTensor<T> out({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), out.raw(), false);
  return out;
}

template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input) {
  if (input.rank() != 4)
    throw ShapeError("im2col expects [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n_batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t pixels = height * width;
  const std::size_t cols_per_row = n_batch * pixels;
  BasicTensor<T> cols({channels * 9, cols_per_row});
  T* out = cols.raw();
  const T* in = input.raw();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = out + (c * 9 + ky * 3 + kx) * cols_per_row;
        for (std::size_t n = 0; n < n_batch; ++n) {
          const T* plane = in + (n * channels + c) * pixels;
          T* dst = row + n * pixels;
          for (std::size_t y = 0; y < height; ++y) {
            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            T* dst_row = dst + y * width;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) {
              std::fill(dst_row, dst_row + width, T{0});
              continue;
            }
            const T* src_row = plane + static_cast<std::size_t>(sy) * width;
            // x + kx - 1 must land inside [0, width).
            const std::size_t x_begin = kx == 0 ? 1 : 0;
            const std::size_t x_end = kx == 2 ? width - 1 : width;
            if (x_begin > 0) dst_row[0] = T{0};
            if (x_end < width) dst_row[width - 1] = T{0};
            for (std::size_t x = x_begin; x < x_end; ++x) dst_row[x] = src_row[x + kx - 1];
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& image_shape) {
  if (image_shape.size() != 4)
    throw ShapeError("col2im expects a [N,C,H,W] target shape, got " + shape_string(image_shape));
  const std::size_t n_batch = image_shape[0], channels = image_shape[1];
  const std::size_t height = image_shape[2], width = image_shape[3];
  const std::size_t pixels = height * width;
  const std::size_t cols_per_row = n_batch * pixels;
  if (cols.rank() != 2 || cols.dim(0) != channels * 9 || cols.dim(1) != cols_per_row)
    throw ShapeError("col2im column matrix " + shape_string(cols.shape()) +
                     " does not match image shape " + shape_string(image_shape));
  BasicTensor<T> image(image_shape);
  T* out = image.raw();
  const T* in = cols.raw();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = in + (c * 9 + ky * 3 + kx) * cols_per_row;
        for (std::size_t n = 0; n < n_batch; ++n) {
          T* plane = out + (n * channels + c) * pixels;
          const T* src = row + n * pixels;
          for (std::size_t y = 0; y < height; ++y) {
            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
            T* dst_row = plane + static_cast<std::size_t>(sy) * width;
            const T* src_row = src + y * width;
            const std::size_t x_begin = kx == 0 ? 1 : 0;
            const std::size_t x_end = kx == 2 ? width - 1 : width;
            for (std::size_t x = x_begin; x < x_end; ++x) dst_row[x + kx - 1] += src_row[x];
          }
        }
      }
    }
  }
  return image;
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.size() != b.size())
    throw ShapeError("dot of tensors with different sizes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

#define STATENET_INSTANTIATE_TENSOR(T)                                                        \
  template class BasicTensor<T>;                                                              \
  template BasicTensor<T> reshape(const BasicTensor<T>&, const Shape&);                       \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template void gemm(bool, bool, std::size_t, std::size_t, std::size_t, const T*, const T*, T*, \
                     bool);                                                                   \
  template BasicTensor<T> im2col(const BasicTensor<T>&);                                      \
  template BasicTensor<T> col2im(const BasicTensor<T>&, const Shape&);                        \
  template double dot(const BasicTensor<T>&, const BasicTensor<T>&);

STATENET_INSTANTIATE_TENSOR(float)
STATENET_INSTANTIATE_TENSOR(double)

}  // namespace statenet
