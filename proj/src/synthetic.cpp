#include "statenet/synthetic.hpp"

#include <array>
#include <algorithm>
#include <cmath>

#include "statenet/rng.hpp"

namespace statenet {

namespace {

constexpr std::array<std::array<int, 3>, 8> kPalette{{
    {220, 40, 40},
    {40, 200, 60},
    {50, 80, 230},
    {230, 210, 40},
    {200, 60, 210},
    {40, 210, 210},
    {240, 140, 30},
    {240, 240, 240},
}};

constexpr std::array<const char*, 8> kNames{"red", "green", "blue", "yellow",
                                            "magenta", "cyan", "orange", "white"};

}  // namespace

LabeledDataset make_blob_dataset(std::size_t num_classes, std::size_t per_class,
                                 std::size_t image_size, std::uint64_t seed, std::string split) {
  if (num_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (image_size < 8) throw ConfigError("synthetic images must be at least 8 pixels wide");
  std::vector<std::string> names;
  for (std::size_t k = 0; k < num_classes; ++k)
    names.push_back(k < kNames.size() ? std::string(kNames[k]) : "class" + std::to_string(k));

  LabeledDataset ds;
  ds.labels = LabelSet(names);
  ds.split = std::move(split);
  Rng rng(seed);
  const double side = static_cast<double>(image_size);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::size_t id = ds.labels.index(names[k]);
    std::array<int, 3> colour{};
    if (k < kPalette.size()) {
      colour = kPalette[k];
    } else {
      for (auto& c : colour) c = static_cast<int>(rng.uniform_int(60, 255));
    }
    for (std::size_t s = 0; s < per_class; ++s) {
      const double radius = rng.uniform(0.2, 0.35) * side;
      const double cx = rng.uniform(radius, side - radius);
      const double cy = rng.uniform(radius, side - radius);
      Tensor image({3, image_size, image_size});
      for (std::size_t y = 0; y < image_size; ++y)
        for (std::size_t x = 0; x < image_size; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - cx;
          const double dy = static_cast<double>(y) + 0.5 - cy;
          const bool inside = dx * dx + dy * dy <= radius * radius;
          for (std::size_t c = 0; c < 3; ++c) {
            const auto noise = rng.uniform_int(-12, 12);
            const auto base = inside ? colour[c] : 30;
            const auto v = std::clamp<std::int64_t>(base + noise, 0, 255);
            image[(c * image_size + y) * image_size + x] = static_cast<float>(v) / 255.0f;
          }
        }
      ds.samples.push_back({std::move(image), static_cast<std::uint16_t>(id)});
    }
  }
  std::stable_sort(ds.samples.begin(), ds.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.label < b.label; });
  return ds;
}

}  // namespace statenet
