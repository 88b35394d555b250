#include "statenet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace statenet {

AugmentPolicy AugmentPolicy::identity() {
  AugmentPolicy p;
  p.rotate = p.shift = p.crop = p.flip = false;
  return p;
}

void AugmentPolicy::validate() const {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    throw ConfigError("flip probability must be in [0, 1]");
  if (!(max_shift_fraction >= 0.0 && max_shift_fraction <= 0.5))
    throw ConfigError("max shift fraction must be in [0, 0.5]");
  if (!(max_rotation_degrees >= 0.0) || !std::isfinite(max_rotation_degrees))
    throw ConfigError("max rotation must be a finite non-negative angle");
}

bool AugmentPolicy::is_identity() const { return !rotate && !shift && !crop && !flip; }

std::uint64_t augmentation_seed(std::uint64_t global_seed, int epoch, std::size_t sample_index) {
  return derive_seed({global_seed, static_cast<std::uint64_t>(Stream::Augment),
                      static_cast<std::uint64_t>(epoch), sample_index});
}

namespace {

// Resamples every channel through a destination -> source pixel map with
// edge clamping.
template <typename Map>
Tensor remap(const Tensor& image, Map&& source_of) {
  const std::size_t channels = image.dim(0), side = image.dim(1);
  const auto last = static_cast<std::int64_t>(side) - 1;
  Tensor out(image.shape());
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      auto [sx, sy] = source_of(static_cast<std::int64_t>(x), static_cast<std::int64_t>(y));
      sx = std::clamp<std::int64_t>(sx, 0, last);
      sy = std::clamp<std::int64_t>(sy, 0, last);
      for (std::size_t c = 0; c < channels; ++c)
        out[(c * side + y) * side + x] =
            image[(c * side + static_cast<std::size_t>(sy)) * side + static_cast<std::size_t>(sx)];
    }
  return out;
}

}  // namespace

Tensor apply_augmentation(const Tensor& image, const AugmentPolicy& policy, Rng& rng) {
  if (image.rank() != 3 || image.dim(1) != image.dim(2))
    throw ShapeError("augmentation expects a square [C,S,S] image, got " +
                     shape_string(image.shape()));
  policy.validate();
  const auto side = static_cast<std::int64_t>(image.dim(1));
  Tensor out = image;

  if (policy.rotate && policy.max_rotation_degrees > 0.0) {
    const double angle = rng.uniform(-policy.max_rotation_degrees, policy.max_rotation_degrees) *
                         std::numbers::pi / 180.0;
    const double cs = std::cos(angle), sn = std::sin(angle);
    const double center = (static_cast<double>(side) - 1.0) / 2.0;
    out = remap(out, [&](std::int64_t x, std::int64_t y) {
      // Inverse rotation of the destination pixel about the image center.
      const double dx = static_cast<double>(x) - center, dy = static_cast<double>(y) - center;
      return std::pair{static_cast<std::int64_t>(std::lround(cs * dx + sn * dy + center)),
                       static_cast<std::int64_t>(std::lround(-sn * dx + cs * dy + center))};
    });
  }

  if (policy.shift) {
    const auto limit = static_cast<std::int64_t>(
        std::floor(policy.max_shift_fraction * static_cast<double>(side)));
    if (limit > 0) {
      const auto sx = rng.uniform_int(-limit, limit);
      const auto sy = rng.uniform_int(-limit, limit);
      out = remap(out, [&](std::int64_t x, std::int64_t y) { return std::pair{x - sx, y - sy}; });
    }
  }

  if (policy.crop && policy.crop_padding > 0) {
    const auto pad = static_cast<std::int64_t>(policy.crop_padding);
    const auto ox = rng.uniform_int(0, 2 * pad);
    const auto oy = rng.uniform_int(0, 2 * pad);
    out = remap(out, [&](std::int64_t x, std::int64_t y) {
      return std::pair{x + ox - pad, y + oy - pad};
    });
  }

  if (policy.flip && rng.bernoulli(policy.flip_probability))
    out = remap(out, [&](std::int64_t x, std::int64_t y) { return std::pair{side - 1 - x, y}; });

  return out;
}

std::string to_string(NormMode mode) { return mode == NormMode::Standardize ? "standardize" : "unit"; }

NormMode parse_norm_mode(std::string_view name) {
  if (name == "standardize") return NormMode::Standardize;
  if (name == "unit") return NormMode::Unit;
  throw ConfigError("unknown normalization '" + std::string(name) +
                    "' (expected standardize or unit)");
}

NormStats compute_norm_stats(const LabeledDataset& train) {
  if (train.empty()) throw DataError("cannot compute normalization stats of an empty split");
  const std::size_t channels = train.samples.front().image.dim(0);
  std::vector<double> sum(channels, 0.0), count(channels, 0.0);
  for (const auto& s : train.samples) {
    const std::size_t plane = s.image.size() / channels;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) sum[c] += s.image[c * plane + p];
      count[c] += static_cast<double>(plane);
    }
  }
  NormStats stats;
  stats.mean.assign(channels, 0.0);
  stats.stddev.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) stats.mean[c] = sum[c] / count[c];
  std::vector<double> sq(channels, 0.0);
  for (const auto& s : train.samples) {
    const std::size_t plane = s.image.size() / channels;
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = s.image[c * plane + p] - stats.mean[c];
        sq[c] += d * d;
      }
  }
  for (std::size_t c = 0; c < channels; ++c)
    stats.stddev[c] = std::max(std::sqrt(sq[c] / count[c]), NormStats::kStdFloor);
  return stats;
}

NormStats norm_stats_for(const LabeledDataset& train, NormMode mode) {
  return mode == NormMode::Standardize ? compute_norm_stats(train) : NormStats{};
}

Tensor normalize(const Tensor& image, const NormStats& stats) {
  const std::size_t channel_axis = image.rank() == 4 ? 1 : 0;
  if (image.rank() != 3 && image.rank() != 4)
    throw ShapeError("normalize expects [C,H,W] or [N,C,H,W], got " + shape_string(image.shape()));
  const std::size_t channels = image.dim(channel_axis);
  if (stats.mean.size() != channels || stats.stddev.size() != channels)
    throw ShapeError("normalization stats have " + std::to_string(stats.mean.size()) +
                     " channels, image has " + std::to_string(channels));
  const std::size_t plane = image.dim(channel_axis + 1) * image.dim(channel_axis + 2);
  const std::size_t batch = channel_axis == 1 ? image.dim(0) : 1;
  Tensor out(image.shape());
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const double mean = stats.mean[c], inv = 1.0 / stats.stddev[c];
      const std::size_t off = (n * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p)
        out[off + p] = static_cast<float>((image[off + p] - mean) * inv);
    }
  return out;
}

}  // namespace statenet
