#include "statenet/model.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace statenet {

void ModelConfig::validate() const {
  if (conv_widths.size() != kConvStages)
    throw ConfigError("model needs exactly " + std::to_string(kConvStages) +
                      " conv widths, got " + std::to_string(conv_widths.size()));
  for (auto w : conv_widths)
    if (w == 0) throw ConfigError("conv widths must be positive");
  if (in_channels == 0) throw ConfigError("in_channels must be positive");
  if (input_size == 0 || input_size % (std::size_t{1} << kConvStages) != 0)
    throw ConfigError("input size must be a positive multiple of 64, got " +
                      std::to_string(input_size));
  if (fc_hidden == 0) throw ConfigError("fc_hidden must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (!(dropout_factor >= 0.0 && dropout_factor < 1.0))
    throw ConfigError("dropout factor must be in [0, 1)");
}

std::size_t ModelConfig::flat_features() const {
  const auto side = final_spatial();
  return conv_widths.back() * side * side;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t channels = config_.in_channels;
  for (auto width : config_.conv_widths) {
    blocks_.push_back({Conv2d<float>(channels, width), BatchNorm2d<float>(width), {}, {}});
    channels = width;
  }
  fc1_ = Linear<float>(config_.flat_features(), config_.fc_hidden);
  dropout_ = Dropout<float>(config_.dropout_factor);
  fc2_ = Linear<float>(config_.fc_hidden, config_.num_classes);
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::Init)}));
  auto he_fill = [&rng](Tensor& weights, std::size_t fan_in) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : weights.data()) w = static_cast<float>(rng.normal() * stddev);
  };
  for (auto& block : blocks_) {
    he_fill(block.conv.params().weights, block.conv.in_channels() * 9);
    block.conv.params().bias.fill(0.0f);
  }
  he_fill(fc1_.params().weights, fc1_.in_features());
  fc1_.params().bias.fill(0.0f);
  he_fill(fc2_.params().weights, fc2_.in_features());
  fc2_.params().bias.fill(0.0f);
}

void Model::zero_weights() {
  for (auto& block : blocks_) {
    block.conv.params().weights.fill(0.0f);
    block.conv.params().bias.fill(0.0f);
  }
  for (auto* fc : {&fc1_, &fc2_}) {
    fc->params().weights.fill(0.0f);
    fc->params().bias.fill(0.0f);
  }
}

void Model::set_dropout(double factor) {
  dropout_.set_factor(factor);
  config_.dropout_factor = factor;
}

void Model::check_input(const Tensor& batch) const {
  const Shape expected{config_.in_channels, config_.input_size, config_.input_size};
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != expected)
    throw ShapeError("model expects [N," + std::to_string(config_.in_channels) + "," +
                     std::to_string(config_.input_size) + "," +
                     std::to_string(config_.input_size) + "] input, got " +
                     shape_string(batch.shape()));
}

Tensor Model::forward(const Tensor& batch, Mode mode, Rng& rng) {
  check_input(batch);
  Tensor x = batch;
  for (auto& block : blocks_) {
    x = block.conv.forward(x);
    x = block.bn.forward(x, mode);
    x = block.relu.forward(x);
    x = block.pool.forward(x);
  }
  flatten_from_ = x.shape();
  x.reshape_inplace({batch.dim(0), config_.flat_features()});
  x = fc1_.forward(x);
  x = fc_relu_.forward(x);
  x = dropout_.forward(x, mode, rng);
  return fc2_.forward(x);
}

void Model::backward(const Tensor& grad_logits) {
  Tensor g = fc2_.backward(grad_logits);
  g = dropout_.backward(g);
  g = fc_relu_.backward(g);
  g = fc1_.backward(g);
  g.reshape_inplace(flatten_from_);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    g = it->pool.backward(g);
    g = it->relu.backward(g);
    g = it->bn.backward(g);
    g = it->conv.backward(g);
  }
}

void Model::zero_grad() {
  for (auto& block : blocks_) {
    block.conv.params().zero_grad();
    block.bn.zero_grad();
  }
  fc1_.params().zero_grad();
  fc2_.params().zero_grad();
}

Tensor Model::infer_logits(const Tensor& batch) const {
  check_input(batch);
  Tensor x = batch;
  for (const auto& block : blocks_) {
    x = block.conv.infer(x);
    x = block.bn.infer(x);
    x = Relu<float>::infer(x);
    x = block.pool.infer(x);
  }
  x.reshape_inplace({batch.dim(0), config_.flat_features()});
  x = fc1_.infer(x);
  x = Relu<float>::infer(x);
  return fc2_.infer(x);
}

Tensor Model::predict_proba(const Tensor& batch) const { return softmax(infer_logits(batch)); }

template <typename Self, typename Visit>
void Model::visit_state(Self& self, bool include_buffers, Visit&& visit) {
  for (std::size_t i = 0; i < self.blocks_.size(); ++i) {
    const auto idx = std::to_string(i + 1);
    auto& conv = self.blocks_[i].conv.params();
    auto& bn = self.blocks_[i].bn;
    visit("conv" + idx + ".weight", conv.weights, &conv.grad_weights);
    visit("conv" + idx + ".bias", conv.bias, &conv.grad_bias);
    visit("bn" + idx + ".gamma", bn.state().gamma, &bn.grad_gamma());
    visit("bn" + idx + ".beta", bn.state().beta, &bn.grad_beta());
  }
  visit("fc1.weight", self.fc1_.params().weights, &self.fc1_.params().grad_weights);
  visit("fc1.bias", self.fc1_.params().bias, &self.fc1_.params().grad_bias);
  visit("fc2.weight", self.fc2_.params().weights, &self.fc2_.params().grad_weights);
  visit("fc2.bias", self.fc2_.params().bias, &self.fc2_.params().grad_bias);
  if (!include_buffers) return;
  for (std::size_t i = 0; i < self.blocks_.size(); ++i) {
    const auto idx = std::to_string(i + 1);
    auto& st = self.blocks_[i].bn.state();
    visit("bn" + idx + ".running_mean", st.running_mean, nullptr);
    visit("bn" + idx + ".running_var", st.running_var, nullptr);
  }
}

std::vector<ParamSlot<float>> Model::parameters() {
  std::vector<ParamSlot<float>> slots;
  visit_state(*this, false, [&](std::string name, Tensor& value, Tensor* grad) {
    slots.push_back({std::move(name), &value, grad});
  });
  return slots;
}

std::vector<NamedTensor> Model::state() {
  std::vector<NamedTensor> out;
  visit_state(*this, true, [&](std::string name, Tensor& value, Tensor*) {
    out.push_back({std::move(name), &value});
  });
  return out;
}

std::vector<ConstNamedTensor> Model::state() const {
  std::vector<ConstNamedTensor> out;
  visit_state(*this, true, [&](std::string name, const Tensor& value, const Tensor*) {
    out.push_back({std::move(name), &value});
  });
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  visit_state(*this, false,
              [&](const std::string&, const Tensor& value, const Tensor*) { total += value.size(); });
  return total;
}

Model build_statenet(const ModelConfig& config, std::uint64_t seed) {
  Model model(config);
  model.initialize(seed);
  return model;
}

ModelSummary model_summary(const Model& model) {
  const auto& cfg = model.config();
  ModelSummary summary;
  std::size_t side = cfg.input_size;
  summary.spatial_trace.push_back(side);
  summary.rows.push_back({"input", {cfg.in_channels, side, side}, 0});
  for (std::size_t i = 0; i < model.blocks().size(); ++i) {
    const auto& block = model.blocks()[i];
    const auto idx = std::to_string(i + 1);
    const std::size_t width = block.conv.filters();
    summary.rows.push_back({"conv" + idx, {width, side, side}, block.conv.params().count()});
    summary.rows.push_back(
        {"batchnorm" + idx, {width, side, side},
         block.bn.state().gamma.size() + block.bn.state().beta.size()});
    summary.rows.push_back({"relu" + idx, {width, side, side}, 0});
    side /= 2;
    summary.rows.push_back({"maxpool" + idx, {width, side, side}, 0});
    summary.spatial_trace.push_back(side);
  }
  summary.rows.push_back({"flatten", {cfg.flat_features()}, 0});
  summary.rows.push_back({"fc1", {cfg.fc_hidden}, model.fc1().params().count()});
  summary.rows.push_back({"relu_fc", {cfg.fc_hidden}, 0});
  summary.rows.push_back({"dropout", {cfg.fc_hidden}, 0});
  summary.rows.push_back({"fc2", {cfg.num_classes}, model.fc2().params().count()});
  summary.rows.push_back({"softmax", {cfg.num_classes}, 0});
  for (const auto& row : summary.rows) summary.total_params += row.params;
  return summary;
}

std::string ModelSummary::render() const {
  auto shape_text = [](const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
    return out + ")";
  };
  std::size_t name_w = 5, shape_w = 12;
  for (const auto& row : rows) {
    name_w = std::max(name_w, row.layer.size());
    shape_w = std::max(shape_w, shape_text(row.output_shape).size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "layer" << " | "
     << std::setw(static_cast<int>(shape_w)) << "output shape" << " | " << "params\n";
  os << std::string(name_w + shape_w + 16, '-') << '\n';
  for (const auto& row : rows)
    os << std::left << std::setw(static_cast<int>(name_w)) << row.layer << " | "
       << std::setw(static_cast<int>(shape_w)) << shape_text(row.output_shape) << " | "
       << std::right << std::setw(9) << row.params << '\n';
  os << std::string(name_w + shape_w + 16, '-') << '\n';
  os << "spatial trace: ";
  for (std::size_t i = 0; i < spatial_trace.size(); ++i)
    os << (i ? "->" : "") << spatial_trace[i];
  os << "\ntotal trainable parameters: " << total_params << '\n';
  return os.str();
}

}  // namespace statenet
