#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "statenet/augment.hpp"
#include "statenet/dataset.hpp"
#include "statenet/evaluation.hpp"
#include "statenet/model.hpp"
#include "statenet/optim.hpp"

namespace statenet {

// Defaults: SGD, lr 0.01, momentum 0.9, batch 32, 80 epochs, lr fixed for
// 50 epochs then x0.9 every 10. The dropout factor lives in ModelConfig.
struct Hyperparams {
  OptimizerSettings optimizer;
  LrSchedule schedule;
  std::size_t batch_size = 32;
  int epochs = 80;
  std::uint64_t seed = 42;
  int snapshot_interval = 10;
  std::size_t eval_batch_size = 64;
  // Report train accuracy/loss from a clean (unaugmented, inference-mode)
  // pass instead of the running values over the augmented batches.
  bool clean_train_pass = false;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_acc = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_loss = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

struct SplitMetrics {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Seeded shuffle of [0, dataset_size) cut into consecutive batches; the last
// batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t dataset_size,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   int epoch);

// Stacks the selected samples into [N, C, S, S], augmenting each with its
// per-sample stream when a policy is given, then normalizes.
Tensor assemble_batch(const LabeledDataset& ds, std::span<const std::size_t> indices,
                      const NormStats& norm, const AugmentPolicy* policy, std::uint64_t seed,
                      int epoch);

// One pass over the training split. Throws DivergenceError on a non-finite
// loss.
SplitMetrics train_epoch(Model& model, const LabeledDataset& train, const NormStats& norm,
                         const AugmentPolicy& policy, const Hyperparams& hyper,
                         Optimizer& optimizer, int epoch);

// Frozen-model accuracy and mean cross-entropy; independent of batch size.
SplitMetrics evaluate_split(const Model& model, const LabeledDataset& ds, const NormStats& norm,
                            std::size_t batch_size);

struct CheckpointMeta {
  int epoch = 0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  NormStats norm;
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

// Layout, little-endian:
//   "SNET" | u32 version | config block | meta block | u32 tensor count |
//   (u32 len, name, u32 rank, u32 dims[rank], f32 payload)* | u32 crc32
void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also rejects a checkpoint whose architecture differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

struct FitOptions {
  AugmentPolicy augment;
  NormMode norm_mode = NormMode::Standardize;
  // When empty nothing is written to disk.
  std::filesystem::path out_dir;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct FitResult {
  std::vector<EpochMetrics> log;
  std::vector<std::filesystem::path> snapshots;
  std::filesystem::path final_checkpoint;
  NormStats norm;
};

// Runs hyper.epochs epochs, appending to out_dir/metrics.csv after every
// epoch and writing snapshot_eNNN.snet every snapshot_interval epochs plus
// final.snet. With ASGD the evaluated and saved weights are the averaged
// iterates once averaging has started.
FitResult fit(Model& model, const LabeledDataset& train, const LabeledDataset& val,
              const Hyperparams& hyper, const FitOptions& options);

}  // namespace statenet
