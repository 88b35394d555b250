#pragma once

#include <cstdint>
#include <string>

#include "statenet/dataset.hpp"

namespace statenet {

// Generates a trivially separable corpus: every class is a disc of a
// distinct colour on a dark noisy background, with random centre and radius.
// Pixel values are quantized to k/255 so the set survives a PPM round trip
// bit-exactly.
LabeledDataset make_blob_dataset(std::size_t num_classes, std::size_t per_class,
                                 std::size_t image_size, std::uint64_t seed,
                                 std::string split = "train");

}  // namespace statenet
