#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "statenet/layers.hpp"

namespace statenet {

// Declarative description of the state-classification network:
// six [conv3x3 -> batchnorm -> relu -> maxpool2x2] stages, then
// flatten -> fc(hidden) -> relu -> dropout -> fc(classes) -> softmax.
struct ModelConfig {
  static constexpr std::size_t kConvStages = 6;

  std::size_t input_size = 64;
  std::size_t in_channels = 3;
  std::vector<std::size_t> conv_widths{16, 32, 64, 64, 128, 128};
  std::size_t fc_hidden = 256;
  std::size_t num_classes = 11;
  double dropout_factor = 0.5;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
  // Spatial side length after all pooling stages.
  std::size_t final_spatial() const { return input_size >> kConvStages; }
  std::size_t flat_features() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ConvBlock {
  Conv2d<float> conv;
  BatchNorm2d<float> bn;
  Relu<float> relu;
  MaxPool2d<float> pool;
};

// Named view of a tensor owned by a Model, used for persistence.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ConstNamedTensor {
  std::string name;
  const Tensor* tensor;
};

class Model {
 public:
  // Parameters start at zero (biases/beta 0, gamma 1); call initialize() for
  // a trainable starting point.
  explicit Model(ModelConfig config);

  // Fan-in scaled normal (He) init for conv/fc weights, zero biases.
  void initialize(std::uint64_t seed);
  // Sets every conv/fc weight and bias to zero; batch-norm stays identity.
  void zero_weights();

  const ModelConfig& config() const { return config_; }
  void set_dropout(double factor);

  // Training-capable forward; caches what backward needs. Returns logits.
  Tensor forward(const Tensor& batch, Mode mode, Rng& rng);
  void backward(const Tensor& grad_logits);
  void zero_grad();

  // Cache-free inference path; safe to call concurrently on a frozen model.
  Tensor infer_logits(const Tensor& batch) const;
  Tensor predict_proba(const Tensor& batch) const;

  std::vector<ParamSlot<float>> parameters();
  // Trainable parameters followed by batch-norm running statistics.
  std::vector<NamedTensor> state();
  std::vector<ConstNamedTensor> state() const;
  std::size_t parameter_count() const;

  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  const Linear<float>& fc1() const { return fc1_; }
  const Linear<float>& fc2() const { return fc2_; }

 private:
  void check_input(const Tensor& batch) const;
  template <typename Self, typename Visit>
  static void visit_state(Self& self, bool include_buffers, Visit&& visit);

  ModelConfig config_;
  std::vector<ConvBlock> blocks_;
  Linear<float> fc1_;
  Relu<float> fc_relu_;
  Dropout<float> dropout_;
  Linear<float> fc2_;
  Shape flatten_from_;
};

Model build_statenet(const ModelConfig& config, std::uint64_t seed);

struct SummaryRow {
  std::string layer;
  Shape output_shape;  // per sample, [C, H, W] or [D]
  std::size_t params = 0;
};

struct ModelSummary {
  std::vector<SummaryRow> rows;
  std::vector<std::size_t> spatial_trace;  // input side, then after each pool
  std::size_t total_params = 0;

  // Aligned "layer | output shape | params" table with a total line.
  std::string render() const;
};

ModelSummary model_summary(const Model& model);

}  // namespace statenet
