#include "statenet/layers.hpp"

#include <algorithm>
#include <cmath>

namespace statenet {

namespace {

void require_rank4(const Shape& shape, const char* what) {
  if (shape.size() != 4)
    throw ShapeError(std::string(what) + " expects [N,C,H,W], got " + shape_string(shape));
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t filters)
    : params_({filters, in_channels, 3, 3}, {filters}) {}

template <typename T>
BasicTensor<T> Conv2d<T>::compute(const BasicTensor<T>& input, BasicTensor<T>& cols) const {
  require_rank4(input.shape(), "conv2d");
  const std::size_t channels = in_channels();
  if (input.dim(1) != channels)
    throw ShapeError("conv2d channel mismatch: layer expects " + std::to_string(channels) +
                     " input channels, got " + shape_string(input.shape()));
  const std::size_t n_batch = input.dim(0), height = input.dim(2), width = input.dim(3);
  if (height == 0 || width == 0) throw ShapeError("conv2d input has empty spatial dims");
  const std::size_t pixels = height * width;
  const std::size_t n_filters = filters();

  cols = im2col(input);
  // [F, C*9] x [C*9, N*H*W]
  std::vector<T> out_mat(n_filters * n_batch * pixels);
  gemm(false, false, n_filters, n_batch * pixels, channels * 9, params_.weights.raw(), cols.raw(),
       out_mat.data(), false);

  BasicTensor<T> out({n_batch, n_filters, height, width});
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t f = 0; f < n_filters; ++f) {
      const T b = params_.bias[f];
      const T* src = out_mat.data() + f * n_batch * pixels + n * pixels;
      T* dst = out.raw() + (n * n_filters + f) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) dst[p] = src[p] + b;
    }
  return out;
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& input) {
  auto out = compute(input, cols_);
  input_shape_ = input.shape();
  return out;
}

template <typename T>
BasicTensor<T> Conv2d<T>::infer(const BasicTensor<T>& input) const {
  BasicTensor<T> cols;
  return compute(input, cols);
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& grad_output) {
  if (input_shape_.empty()) throw ShapeError("conv2d backward called before forward");
  const std::size_t n_batch = input_shape_[0], channels = input_shape_[1];
  const std::size_t pixels = input_shape_[2] * input_shape_[3];
  const std::size_t n_filters = filters();
  if (grad_output.shape() != Shape{n_batch, n_filters, input_shape_[2], input_shape_[3]})
    throw ShapeError("conv2d backward gradient shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");

  // [N, F, HW] -> [F, N*HW]
  std::vector<T> grad_mat(n_filters * n_batch * pixels);
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t f = 0; f < n_filters; ++f) {
      const T* src = grad_output.raw() + (n * n_filters + f) * pixels;
      T* dst = grad_mat.data() + f * n_batch * pixels + n * pixels;
      T acc{0};
      for (std::size_t p = 0; p < pixels; ++p) {
        dst[p] = src[p];
        acc += src[p];
      }
      params_.grad_bias[f] += acc;
    }

  const std::size_t cols = n_batch * pixels;
  gemm(false, true, n_filters, channels * 9, cols, grad_mat.data(), cols_.raw(),
       params_.grad_weights.raw(), true);

  BasicTensor<T> grad_cols({channels * 9, cols});
  gemm(true, false, channels * 9, cols, n_filters, params_.weights.raw(), grad_mat.data(),
       grad_cols.raw(), false);
  return col2im(grad_cols, input_shape_);
}

// ---------------------------------------------------------------- MaxPool2d

template <typename T>
BasicTensor<T> MaxPool2d<T>::compute(const BasicTensor<T>& input,
                                     std::vector<std::size_t>* argmax) const {
  require_rank4(input.shape(), "maxpool2d");
  const std::size_t n_batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (height % 2 != 0 || width % 2 != 0 || height == 0 || width == 0)
    throw ShapeError("maxpool2d needs even, non-zero spatial dims, got " +
                     shape_string(input.shape()));
  const std::size_t out_h = height / 2, out_w = width / 2;
  BasicTensor<T> out({n_batch, channels, out_h, out_w});
  if (argmax) argmax->resize(out.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n_batch * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x, ++o) {
        const std::size_t top_left = base + 2 * y * width + 2 * x;
        const std::size_t window[4] = {top_left, top_left + 1, top_left + width,
                                       top_left + width + 1};
        std::size_t best = window[0];
        for (std::size_t k = 1; k < 4 && !std::isnan(input[best]); ++k)
          if (input[window[k]] > input[best] || std::isnan(input[window[k]])) best = window[k];
        out[o] = input[best];
        if (argmax) (*argmax)[o] = best;
      }
  }
  return out;
}

template <typename T>
BasicTensor<T> MaxPool2d<T>::forward(const BasicTensor<T>& input) {
  input_shape_ = input.shape();
  return compute(input, &argmax_);
}

template <typename T>
BasicTensor<T> MaxPool2d<T>::infer(const BasicTensor<T>& input) const {
  return compute(input, nullptr);
}

template <typename T>
BasicTensor<T> MaxPool2d<T>::backward(const BasicTensor<T>& grad_output) const {
  if (grad_output.size() != argmax_.size())
    throw ShapeError("maxpool2d backward gradient shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");
  BasicTensor<T> grad_input(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_input[argmax_[o]] += grad_output[o];
  return grad_input;
}

// ---------------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels)
    : grad_gamma_({channels}), grad_beta_({channels}) {
  state_.gamma = BasicTensor<T>({channels}, T{1});
  state_.beta = BasicTensor<T>({channels}, T{0});
  state_.running_mean = BasicTensor<T>({channels}, T{0});
  state_.running_var = BasicTensor<T>({channels}, T{1});
}

template <typename T>
void BatchNorm2d<T>::zero_grad() {
  grad_gamma_.fill(T{0});
  grad_beta_.fill(T{0});
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::infer(const BasicTensor<T>& input) const {
  require_rank4(input.shape(), "batchnorm2d");
  const std::size_t n_batch = input.dim(0), channels = input.dim(1);
  if (channels != this->channels())
    throw ShapeError("batchnorm2d channel mismatch: " + shape_string(input.shape()));
  const std::size_t pixels = input.dim(2) * input.dim(3);
  BasicTensor<T> out(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const double inv_std =
        1.0 / std::sqrt(static_cast<double>(state_.running_var[c]) + state_.epsilon);
    const double scale = state_.gamma[c] * inv_std;
    const double shift = state_.beta[c] - state_.running_mean[c] * scale;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* src = input.raw() + (n * channels + c) * pixels;
      T* dst = out.raw() + (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) dst[p] = static_cast<T>(src[p] * scale + shift);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::forward(const BasicTensor<T>& input, Mode mode) {
  if (mode == Mode::Infer) {
    cached_train_ = false;
    return infer(input);
  }
  require_rank4(input.shape(), "batchnorm2d");
  const std::size_t n_batch = input.dim(0), channels = input.dim(1);
  if (channels != this->channels())
    throw ShapeError("batchnorm2d channel mismatch: " + shape_string(input.shape()));
  const std::size_t pixels = input.dim(2) * input.dim(3);
  const std::size_t count = n_batch * pixels;
  if (count < 2)
    throw ShapeError("batchnorm2d training needs at least 2 values per channel, got " +
                     shape_string(input.shape()));

  normalized_ = BasicTensor<T>(input.shape());
  inv_std_.assign(channels, 0.0);
  BasicTensor<T> out(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* src = input.raw() + (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) sum += src[p];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* src = input.raw() + (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        const double d = src[p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const double inv_std = 1.0 / std::sqrt(var + state_.epsilon);
    inv_std_[c] = inv_std;
    const double gamma = state_.gamma[c], beta = state_.beta[c];
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t off = (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        const double xhat = (input[off + p] - mean) * inv_std;
        normalized_[off + p] = static_cast<T>(xhat);
        out[off + p] = static_cast<T>(gamma * xhat + beta);
      }
    }
    const double m = state_.momentum;
    const double unbiased = sq / static_cast<double>(count - 1);
    state_.running_mean[c] = static_cast<T>((1.0 - m) * state_.running_mean[c] + m * mean);
    state_.running_var[c] = static_cast<T>((1.0 - m) * state_.running_var[c] + m * unbiased);
  }
  cached_train_ = true;
  return out;
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::backward(const BasicTensor<T>& grad_output) {
  if (!cached_train_) throw ShapeError("batchnorm2d backward requires a training-mode forward");
  if (grad_output.shape() != normalized_.shape())
    throw ShapeError("batchnorm2d backward gradient shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");
  const auto& shape = normalized_.shape();
  const std::size_t n_batch = shape[0], channels = shape[1], pixels = shape[2] * shape[3];
  const double count = static_cast<double>(n_batch * pixels);
  BasicTensor<T> grad_input(shape);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t off = (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        sum_dy += grad_output[off + p];
        sum_dy_xhat += static_cast<double>(grad_output[off + p]) * normalized_[off + p];
      }
    }
    grad_gamma_[c] += static_cast<T>(sum_dy_xhat);
    grad_beta_[c] += static_cast<T>(sum_dy);
    const double k = state_.gamma[c] * inv_std_[c] / count;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t off = (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p)
        grad_input[off + p] = static_cast<T>(
            k * (count * grad_output[off + p] - sum_dy - normalized_[off + p] * sum_dy_xhat));
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------- Relu

template <typename T>
BasicTensor<T> Relu<T>::infer(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (auto& v : out.data()) v = v <= T{0} ? T{0} : v;  // NaN passes through
  return out;
}

template <typename T>
BasicTensor<T> Relu<T>::forward(const BasicTensor<T>& input) {
  active_.resize(input.size());
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    active_[i] = input[i] > T{0};
    out[i] = input[i] <= T{0} ? T{0} : input[i];
  }
  return out;
}

template <typename T>
BasicTensor<T> Relu<T>::backward(const BasicTensor<T>& grad_output) const {
  if (grad_output.size() != active_.size())
    throw ShapeError("relu backward gradient shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");
  BasicTensor<T> grad_input(grad_output.shape());
  for (std::size_t i = 0; i < active_.size(); ++i)
    grad_input[i] = active_[i] ? grad_output[i] : T{0};
  return grad_input;
}

// ---------------------------------------------------------------- Dropout

template <typename T>
Dropout<T>::Dropout(double factor) : factor_(0.0) {
  set_factor(factor);
}

template <typename T>
void Dropout<T>::set_factor(double factor) {
  if (!(factor >= 0.0 && factor < 1.0))
    throw ConfigError("dropout factor must be in [0, 1), got " + std::to_string(factor));
  factor_ = factor;
}

template <typename T>
BasicTensor<T> Dropout<T>::forward(const BasicTensor<T>& input, Mode mode, Rng& rng) {
  if (mode == Mode::Infer || factor_ == 0.0) {
    mask_.assign(input.size(), T{1});
    return input;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - factor_));
  mask_.resize(input.size());
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    mask_[i] = rng.bernoulli(factor_) ? T{0} : scale;
    out[i] = input[i] * mask_[i];
  }
  return out;
}

template <typename T>
BasicTensor<T> Dropout<T>::backward(const BasicTensor<T>& grad_output) const {
  if (grad_output.size() != mask_.size())
    throw ShapeError("dropout backward gradient shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");
  BasicTensor<T> grad_input(grad_output.shape());
  for (std::size_t i = 0; i < mask_.size(); ++i) grad_input[i] = grad_output[i] * mask_[i];
  return grad_input;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features)
    : params_({in_features, out_features}, {out_features}) {}

template <typename T>
BasicTensor<T> Linear<T>::infer(const BasicTensor<T>& input) const {
  if (input.rank() != 2 || input.dim(1) != in_features())
    throw ShapeError("linear expects [N," + std::to_string(in_features()) + "], got " +
                     shape_string(input.shape()));
  const std::size_t n_batch = input.dim(0), units = out_features();
  BasicTensor<T> out({n_batch, units});
  for (std::size_t n = 0; n < n_batch; ++n)
    std::copy(params_.bias.raw(), params_.bias.raw() + units, out.raw() + n * units);
  gemm(false, false, n_batch, units, in_features(), input.raw(), params_.weights.raw(), out.raw(),
       true);
  return out;
}

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& input) {
  auto out = infer(input);
  input_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Linear<T>::backward(const BasicTensor<T>& grad_output) {
  const std::size_t n_batch = input_.rank() == 2 ? input_.dim(0) : 0;
  const std::size_t units = out_features();
  if (grad_output.shape() != Shape{n_batch, units})
    throw ShapeError("linear backward gradient shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");
  gemm(true, false, in_features(), units, n_batch, input_.raw(), grad_output.raw(),
       params_.grad_weights.raw(), true);
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t u = 0; u < units; ++u) params_.grad_bias[u] += grad_output[n * units + u];
  BasicTensor<T> grad_input({n_batch, in_features()});
  gemm(false, true, n_batch, in_features(), units, grad_output.raw(), params_.weights.raw(),
       grad_input.raw(), false);
  return grad_input;
}

// ---------------------------------------------------------------- softmax

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [N,K], got " + shape_string(logits.shape()));
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> probs(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * k;
    const T top = *std::max_element(z, z + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(z[j] - top));
    for (std::size_t j = 0; j < k; ++j)
      probs[r * k + j] = static_cast<T>(std::exp(static_cast<double>(z[j] - top)) / total);
  }
  return probs;
}

template <typename T>
SoftmaxResult<T> SoftmaxCrossEntropy<T>::forward(const BasicTensor<T>& logits,
                                                 std::span<const std::size_t> labels) {
  if (logits.rank() != 2)
    throw ShapeError("softmax_xent expects [N,K], got " + shape_string(logits.shape()));
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  if (labels.size() != rows)
    throw ShapeError("softmax_xent got " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  for (auto label : labels)
    if (label >= k)
      throw DataError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(k) + " classes");

  SoftmaxResult<T> result;
  result.probs = softmax(logits);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * k;
    const double top = *std::max_element(z, z + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(z[j] - top);
    loss += std::log(total) - (z[labels[r]] - top);
  }
  result.loss = rows ? loss / static_cast<double>(rows) : 0.0;
  probs_ = result.probs;
  labels_.assign(labels.begin(), labels.end());
  return result;
}

template <typename T>
BasicTensor<T> SoftmaxCrossEntropy<T>::backward() const {
  BasicTensor<T> grad = probs_;
  if (labels_.empty()) return grad;
  const std::size_t k = probs_.dim(1);
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(labels_.size()));
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    grad[r * k + labels_[r]] -= T{1};
    for (std::size_t j = 0; j < k; ++j) grad[r * k + j] *= inv_n;
  }
  return grad;
}

#define STATENET_INSTANTIATE_LAYERS(T)                     \
  template class Conv2d<T>;                                \
  template class MaxPool2d<T>;                             \
  template class BatchNorm2d<T>;                           \
  template class Relu<T>;                                  \
  template class Dropout<T>;                               \
  template class Linear<T>;                                \
  template class SoftmaxCrossEntropy<T>;                   \
  template BasicTensor<T> softmax(const BasicTensor<T>&);

STATENET_INSTANTIATE_LAYERS(float)
STATENET_INSTANTIATE_LAYERS(double)

}  // namespace statenet
