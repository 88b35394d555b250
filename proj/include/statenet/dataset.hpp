#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "statenet/tensor.hpp"

namespace statenet {

// Class names sorted lexicographically; a class id is the position in that
// order, so ids are stable across reloads of the same tree.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const;
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Sample {
  Tensor image;  // [3, H, W], values in [0, 1]
  std::uint16_t label = 0;

  bool operator==(const Sample&) const = default;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  LabelSet labels;
  std::string split;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Checks label ranges and that every image is [3, S, S] with one S.
  void validate() const;

  bool operator==(const LabeledDataset&) const = default;
};

// Binary PPM (P6, maxval 255) to a [3, H, W] tensor scaled to [0, 1].
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
Tensor load_ppm(const std::filesystem::path& path);
// Writes a [3, H, W] tensor as P6, clamping to [0, 1] and rounding.
void write_ppm(const Tensor& image, const std::filesystem::path& path);

// Nearest-neighbour resize of a [C, H, W] image to [C, size, size].
Tensor resize_nearest(const Tensor& image, std::size_t size);

// Reads root/<split>/<class>/<file>.ppm. Samples are ordered by
// (class name, file name).
LabeledDataset load_dataset_dir(const std::filesystem::path& root, const std::string& split,
                                std::size_t target_size);

// Inverse of load_dataset_dir for already-quantized images.
void write_dataset_dir(const LabeledDataset& ds, const std::filesystem::path& root);

std::vector<std::size_t> class_frequencies(const LabeledDataset& ds);
// "class,count" rows with a header line.
std::string class_frequencies_csv(const LabeledDataset& ds);

// Packed layout, little-endian:
//   "SDS1" | u32 version | u32 class count | (u32 len, utf-8 name)* |
//   u32 sample count | (u16 label, u16 H, u16 W, f32[3*H*W])* | u32 crc32
void pack_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
// The split name is not stored in the file; the caller supplies it.
LabeledDataset unpack_dataset(const std::filesystem::path& path, std::string split = "packed");

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace statenet
