#include "statenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "binary_io.hpp"

namespace statenet {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCheckpointMagic = "SNET";
constexpr std::uint32_t kCheckpointVersion = 1;

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

void Hyperparams::validate() const {
  optimizer.validate();
  schedule.validate();
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (snapshot_interval < 0) throw ConfigError("snapshot interval must be >= 0");
  if (eval_batch_size < 1) throw ConfigError("evaluation batch size must be >= 1");
}

std::string metrics_csv_header() { return "epoch,lr,train_acc,train_loss,val_acc,val_loss"; }

std::string metrics_csv_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + ',' + format_double("%.17g", m.lr) + ',' +
         format_double("%.6f", m.train_acc) + ',' + format_double("%.6f", m.train_loss) + ',' +
         format_double("%.6f", m.val_acc) + ',' + format_double("%.6f", m.val_loss);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t dataset_size,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   int epoch) {
  if (dataset_size == 0) throw DataError("cannot batch an empty dataset");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::Shuffle),
                       static_cast<std::uint64_t>(epoch)}));
  for (std::size_t i = dataset_size - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(dataset_size, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Tensor assemble_batch(const LabeledDataset& ds, std::span<const std::size_t> indices,
                      const NormStats& norm, const AugmentPolicy* policy, std::uint64_t seed,
                      int epoch) {
  if (indices.empty()) throw DataError("empty batch");
  const auto& shape = ds.samples.at(indices.front()).image.shape();
  const std::size_t stride = shape_size(shape);
  Tensor batch({indices.size(), shape[0], shape[1], shape[2]});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& image = ds.samples.at(indices[i]).image;
    if (image.shape() != shape) throw DataError("images in the split differ in size");
    if (policy && !policy->is_identity()) {
      Rng rng(augmentation_seed(seed, epoch, indices[i]));
      const auto augmented = apply_augmentation(image, *policy, rng);
      std::copy(augmented.values().begin(), augmented.values().end(), batch.raw() + i * stride);
    } else {
      std::copy(image.values().begin(), image.values().end(), batch.raw() + i * stride);
    }
  }
  return normalize(batch, norm);
}

SplitMetrics train_epoch(Model& model, const LabeledDataset& train, const NormStats& norm,
                         const AugmentPolicy& policy, const Hyperparams& hyper,
                         Optimizer& optimizer, int epoch) {
  if (train.empty()) throw DataError("cannot train on an empty split");
  const double lr = lr_at_epoch(hyper.schedule, epoch);
  const auto batches = make_batches(train.size(), hyper.batch_size, hyper.seed, epoch);
  const std::size_t k = model.config().num_classes;
  SoftmaxCrossEntropy<float> criterion;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  auto params = model.parameters();

  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& idx = batches[b];
    const Tensor inputs = assemble_batch(train, idx, norm, &policy, hyper.seed, epoch);
    std::vector<std::size_t> labels;
    labels.reserve(idx.size());
    for (auto i : idx) labels.push_back(train.samples[i].label);

    model.zero_grad();
    Rng dropout_rng(derive_seed({hyper.seed, static_cast<std::uint64_t>(Stream::Dropout),
                                 static_cast<std::uint64_t>(epoch), b}));
    const Tensor logits = model.forward(inputs, Mode::Train, dropout_rng);
    const auto result = criterion.forward(logits, labels);
    if (!std::isfinite(result.loss))
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b + 1));
    model.backward(criterion.backward());
    optimizer.step(params, lr);

    loss_sum += result.loss * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const float* row = result.probs.raw() + i * k;
      const auto predicted = static_cast<std::size_t>(std::max_element(row, row + k) - row);
      if (predicted == labels[i]) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(train.size()),
          loss_sum / static_cast<double>(train.size())};
}

SplitMetrics evaluate_split(const Model& model, const LabeledDataset& ds, const NormStats& norm,
                            std::size_t batch_size) {
  const Model* members[] = {&model};
  const auto p = predict_split(members, ds, norm, batch_size);
  return {p.accuracy, p.loss};
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const fs::path& path) {
  const auto& cfg = model.config();
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);

  w.u32(static_cast<std::uint32_t>(cfg.input_size));
  w.u32(static_cast<std::uint32_t>(cfg.in_channels));
  w.u32(static_cast<std::uint32_t>(cfg.conv_widths.size()));
  for (auto width : cfg.conv_widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(cfg.fc_hidden));
  w.u32(static_cast<std::uint32_t>(cfg.num_classes));
  w.f64(cfg.dropout_factor);

  w.u32(static_cast<std::uint32_t>(meta.epoch));
  w.u8(static_cast<std::uint8_t>(meta.optimizer));
  w.u64(meta.seed);
  w.u32(static_cast<std::uint32_t>(meta.class_names.size()));
  for (const auto& name : meta.class_names) w.str(name);
  if (meta.norm.mean.size() != meta.norm.stddev.size())
    throw ShapeError("normalization stats have mismatched mean/std lengths");
  w.u32(static_cast<std::uint32_t>(meta.norm.mean.size()));
  for (std::size_t c = 0; c < meta.norm.mean.size(); ++c) {
    w.f64(meta.norm.mean[c]);
    w.f64(meta.norm.stddev[c]);
  }

  const auto tensors = model.state();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(tensor->rank()));
    for (auto d : tensor->shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : tensor->data()) w.f32(v);
  }
  w.crc_trailer();
  w.save(path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string what = path.string();
  auto r = detail::open_framed(bytes, kCheckpointMagic, kCheckpointVersion, what);

  ModelConfig cfg;
  cfg.input_size = r.u32();
  cfg.in_channels = r.u32();
  const auto n_widths = r.u32();
  if (n_widths > 64) throw FormatError(what + ": implausible conv stage count");
  cfg.conv_widths.clear();
  for (std::uint32_t i = 0; i < n_widths; ++i) cfg.conv_widths.push_back(r.u32());
  cfg.fc_hidden = r.u32();
  cfg.num_classes = r.u32();
  cfg.dropout_factor = r.f64();

  CheckpointMeta meta;
  meta.epoch = static_cast<int>(r.u32());
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(OptimizerKind::Asgd))
    throw FormatError(what + ": unknown optimizer kind");
  meta.optimizer = static_cast<OptimizerKind>(kind);
  meta.seed = r.u64();
  const auto n_names = r.u32();
  for (std::uint32_t i = 0; i < n_names; ++i) meta.class_names.push_back(r.str());
  const auto n_channels = r.u32();
  meta.norm.mean.assign(n_channels, 0.0);
  meta.norm.stddev.assign(n_channels, 1.0);
  for (std::uint32_t c = 0; c < n_channels; ++c) {
    meta.norm.mean[c] = r.f64();
    meta.norm.stddev[c] = r.f64();
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(what + ": invalid model config block: " + e.what());
  }
  if (!meta.class_names.empty() && meta.class_names.size() != cfg.num_classes)
    throw FormatError(what + ": class-name count does not match the model's class count");

  Model model(cfg);
  std::map<std::string, Tensor*> slots;
  for (auto& named : model.state()) slots.emplace(named.name, named.tensor);
  const auto n_tensors = r.u32();
  if (n_tensors != slots.size())
    throw FormatError(what + ": expected " + std::to_string(slots.size()) + " tensors, found " +
                      std::to_string(n_tensors));
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    const auto name = r.str();
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError(what + ": unexpected tensor '" + name + "'");
    const auto rank = r.u32();
    if (rank > 8) throw FormatError(what + ": implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (shape != it->second->shape())
      throw ShapeError(what + ": tensor '" + name + "' has shape " + shape_string(shape) +
                       ", model expects " + shape_string(it->second->shape()));
    for (auto& v : it->second->data()) v = r.f32();
    slots.erase(it);
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after tensors");
  return {std::move(model), std::move(meta)};
}

Checkpoint load_checkpoint(const fs::path& path, const ModelConfig& expected) {
  auto ckpt = load_checkpoint(path);
  const auto& cfg = ckpt.model.config();
  if (cfg.input_size != expected.input_size || cfg.in_channels != expected.in_channels ||
      cfg.conv_widths != expected.conv_widths || cfg.fc_hidden != expected.fc_hidden ||
      cfg.num_classes != expected.num_classes)
    throw ShapeError(path.string() + ": checkpoint architecture does not match the configured model");
  return ckpt;
}

// ---------------------------------------------------------------- fit

FitResult fit(Model& model, const LabeledDataset& train, const LabeledDataset& val,
              const Hyperparams& hyper, const FitOptions& options) {
  hyper.validate();
  options.augment.validate();
  train.validate();
  val.validate();
  if (train.empty()) throw DataError("training split is empty");
  if (val.empty()) throw DataError("validation split is empty");
  if (train.labels != val.labels) throw DataError("train and validation splits have different classes");
  if (model.config().num_classes != train.labels.size())
    throw ConfigError("model has " + std::to_string(model.config().num_classes) +
                      " classes but the data has " + std::to_string(train.labels.size()));

  FitResult result;
  result.norm = norm_stats_for(train, options.norm_mode);
  Optimizer optimizer(hyper.optimizer);

  std::ofstream metrics;
  const bool write = !options.out_dir.empty();
  if (write) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + options.out_dir.string());
    metrics.open(options.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics) throw DataError("cannot write " + (options.out_dir / "metrics.csv").string());
    metrics << metrics_csv_header() << '\n' << std::flush;
  }

  CheckpointMeta meta;
  meta.optimizer = hyper.optimizer.kind;
  meta.seed = hyper.seed;
  meta.class_names = train.labels.names();
  meta.norm = result.norm;

  auto evaluation_model = [&]() -> Model {
    Model copy = model;
    if (optimizer.averaging_active()) optimizer.copy_averaged_to(copy.parameters());
    return copy;
  };

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr_at_epoch(hyper.schedule, epoch);
    const auto tr = train_epoch(model, train, result.norm, options.augment, hyper, optimizer, epoch);
    const Model frozen = evaluation_model();
    const auto reported = hyper.clean_train_pass
                              ? evaluate_split(frozen, train, result.norm, hyper.eval_batch_size)
                              : tr;
    const auto va = evaluate_split(frozen, val, result.norm, hyper.eval_batch_size);
    m.train_acc = reported.accuracy;
    m.train_loss = reported.loss;
    m.val_acc = va.accuracy;
    m.val_loss = va.loss;
    result.log.push_back(m);
    if (write) {
      metrics << metrics_csv_row(m) << '\n' << std::flush;
      if (!metrics) throw DataError("failed writing metrics.csv");
      meta.epoch = epoch;
      if (hyper.snapshot_interval > 0 && epoch % hyper.snapshot_interval == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_e%03d.snet", epoch);
        save_checkpoint(frozen, meta, options.out_dir / name);
        result.snapshots.push_back(options.out_dir / name);
      }
      if (epoch == hyper.epochs) {
        result.final_checkpoint = options.out_dir / "final.snet";
        save_checkpoint(frozen, meta, result.final_checkpoint);
      }
    }
    if (options.on_epoch) options.on_epoch(m);
  }
  if (optimizer.averaging_active()) optimizer.copy_averaged_to(model.parameters());
  return result;
}

}  // namespace statenet
