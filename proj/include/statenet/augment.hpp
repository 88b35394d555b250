#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "statenet/dataset.hpp"
#include "statenet/rng.hpp"

namespace statenet {

// Stochastic per-epoch transforms, applied in the fixed order
// rotate -> shift -> pad-and-random-crop -> horizontal flip. Pixels that
// fall outside the frame take the nearest edge value.
struct AugmentPolicy {
  double max_rotation_degrees = 25.0;
  double max_shift_fraction = 0.1;
  std::size_t crop_padding = 4;
  double flip_probability = 0.5;
  bool rotate = true;
  bool shift = true;
  bool crop = true;
  bool flip = true;

  static AugmentPolicy identity();
  void validate() const;
  bool is_identity() const;
  bool operator==(const AugmentPolicy&) const = default;
};

Tensor apply_augmentation(const Tensor& image, const AugmentPolicy& policy, Rng& rng);

// Per-sample stream seed so that results do not depend on processing order.
std::uint64_t augmentation_seed(std::uint64_t global_seed, int epoch, std::size_t sample_index);

enum class NormMode {
  Standardize,  // per-channel training-set mean/std
  Unit,         // plain [0, 1] pixels (mean 0, std 1)
};

std::string to_string(NormMode mode);
NormMode parse_norm_mode(std::string_view name);

struct NormStats {
  std::vector<double> mean{0.0, 0.0, 0.0};
  std::vector<double> stddev{1.0, 1.0, 1.0};

  static constexpr double kStdFloor = 1e-6;
  bool operator==(const NormStats&) const = default;
};

NormStats compute_norm_stats(const LabeledDataset& train);
NormStats norm_stats_for(const LabeledDataset& train, NormMode mode);

// (pixel - mean_c) / std_c for a [C,H,W] image or a [N,C,H,W] batch.
Tensor normalize(const Tensor& image, const NormStats& stats);

}  // namespace statenet
