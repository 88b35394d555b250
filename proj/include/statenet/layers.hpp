#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "statenet/rng.hpp"
#include "statenet/tensor.hpp"

namespace statenet {

enum class Mode { Train, Infer };

template <typename T>
struct LayerParams {
  BasicTensor<T> weights;
  BasicTensor<T> bias;
  BasicTensor<T> grad_weights;
  BasicTensor<T> grad_bias;

  LayerParams() = default;
  LayerParams(Shape weight_shape, Shape bias_shape)
      : weights(weight_shape), bias(bias_shape), grad_weights(weight_shape), grad_bias(bias_shape) {}

  void zero_grad() {
    grad_weights.fill(T{0});
    grad_bias.fill(T{0});
  }
  std::size_t count() const { return weights.size() + bias.size(); }
};

// Non-owning view of one trainable tensor and its gradient.
template <typename T>
struct ParamSlot {
  std::string name;
  BasicTensor<T>* value;
  BasicTensor<T>* grad;
};

// 3x3 convolution, stride 1, padding 1 (spatial size preserved).
// weights [F, C, 3, 3], bias [F].
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t filters);

  BasicTensor<T> forward(const BasicTensor<T>& input);
  BasicTensor<T> infer(const BasicTensor<T>& input) const;
  // Accumulates weight/bias gradients and returns the input gradient.
  BasicTensor<T> backward(const BasicTensor<T>& grad_output);

  LayerParams<T>& params() { return params_; }
  const LayerParams<T>& params() const { return params_; }
  std::size_t in_channels() const { return params_.weights.shape()[1]; }
  std::size_t filters() const { return params_.weights.shape()[0]; }

 private:
  BasicTensor<T> compute(const BasicTensor<T>& input, BasicTensor<T>& cols) const;

  LayerParams<T> params_;
  BasicTensor<T> cols_;
  Shape input_shape_;
};

// 2x2 max pooling with stride 2. Ties go to the first element of the window
// in row-major order.
template <typename T>
class MaxPool2d {
 public:
  BasicTensor<T> forward(const BasicTensor<T>& input);
  BasicTensor<T> infer(const BasicTensor<T>& input) const;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) const;

 private:
  BasicTensor<T> compute(const BasicTensor<T>& input, std::vector<std::size_t>* argmax) const;

  std::vector<std::size_t> argmax_;
  Shape input_shape_;
};

template <typename T>
struct BatchNormState {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

// Per-channel batch normalization over (N, H, W). Training mode normalizes
// with the biased batch variance and updates the running statistics (the
// running variance uses the unbiased estimate).
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode);
  BasicTensor<T> infer(const BasicTensor<T>& input) const;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output);

  BatchNormState<T>& state() { return state_; }
  const BatchNormState<T>& state() const { return state_; }
  BasicTensor<T>& grad_gamma() { return grad_gamma_; }
  BasicTensor<T>& grad_beta() { return grad_beta_; }
  const BasicTensor<T>& grad_gamma() const { return grad_gamma_; }
  const BasicTensor<T>& grad_beta() const { return grad_beta_; }
  void zero_grad();
  std::size_t channels() const { return state_.gamma.size(); }

 private:
  BatchNormState<T> state_;
  BasicTensor<T> grad_gamma_;
  BasicTensor<T> grad_beta_;
  BasicTensor<T> normalized_;
  std::vector<double> inv_std_;
  bool cached_train_ = false;
};

template <typename T>
class Relu {
 public:
  BasicTensor<T> forward(const BasicTensor<T>& input);
  static BasicTensor<T> infer(const BasicTensor<T>& input);
  // Gradient is zero wherever the input was <= 0.
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) const;

 private:
  std::vector<std::uint8_t> active_;
};

// Inverted dropout: survivors are scaled by 1/(1-factor) during training so
// inference is the identity.
template <typename T>
class Dropout {
 public:
  explicit Dropout(double factor = 0.5);

  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode, Rng& rng);
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) const;

  double factor() const { return factor_; }
  void set_factor(double factor);

 private:
  double factor_;
  std::vector<T> mask_;
};

// Fully connected layer: out = input . weights + bias, weights [D, U].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features);

  BasicTensor<T> forward(const BasicTensor<T>& input);
  BasicTensor<T> infer(const BasicTensor<T>& input) const;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output);

  LayerParams<T>& params() { return params_; }
  const LayerParams<T>& params() const { return params_; }
  std::size_t in_features() const { return params_.weights.shape()[0]; }
  std::size_t out_features() const { return params_.weights.shape()[1]; }

 private:
  LayerParams<T> params_;
  BasicTensor<T> input_;
};

template <typename T>
struct SoftmaxResult {
  double loss = 0.0;
  BasicTensor<T> probs;
};

// Row-wise softmax with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// Softmax followed by mean negative log-likelihood of the true class.
template <typename T>
class SoftmaxCrossEntropy {
 public:
  SoftmaxResult<T> forward(const BasicTensor<T>& logits, std::span<const std::size_t> labels);
  // (probs - one_hot) / N for the last forward call.
  BasicTensor<T> backward() const;

 private:
  BasicTensor<T> probs_;
  std::vector<std::size_t> labels_;
};

}  // namespace statenet
