#include "statenet/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "binary_io.hpp"

namespace statenet {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPackMagic = "SDS1";
constexpr std::uint32_t kPackVersion = 1;

}  // namespace

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  if (std::adjacent_find(names_.begin(), names_.end()) != names_.end())
    throw DataError("duplicate class names in label set");
  if (names_.size() < 2)
    throw DataError("label set needs at least 2 classes, got " + std::to_string(names_.size()));
}

const std::string& LabelSet::name(std::size_t id) const {
  if (id >= names_.size())
    throw DataError("class id " + std::to_string(id) + " out of range for " +
                    std::to_string(names_.size()) + " classes");
  return names_[id];
}

std::size_t LabelSet::index(std::string_view name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) throw DataError("unknown class '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

bool LabelSet::contains(std::string_view name) const {
  return std::binary_search(names_.begin(), names_.end(), name);
}

void LabeledDataset::validate() const {
  std::size_t side = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label >= labels.size())
      throw DataError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                      " outside the " + std::to_string(labels.size()) + "-class label set");
    const auto& shape = s.image.shape();
    if (shape.size() != 3 || shape[0] != 3 || shape[1] != shape[2])
      throw DataError("sample " + std::to_string(i) + " is not a square [3,S,S] image: " +
                      shape_string(shape));
    if (side == 0) side = shape[1];
    if (shape[1] != side)
      throw DataError("sample " + std::to_string(i) + " has size " + std::to_string(shape[1]) +
                      ", expected " + std::to_string(side));
  }
}

// ---------------------------------------------------------------- PPM

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#')
    token.push_back(static_cast<char>(bytes[pos++]));
  return token;
}

std::size_t parse_header_int(const std::string& token, const char* field) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; }) || token.size() > 9)
    throw FormatError(std::string("malformed PPM header: bad ") + field + " '" + token + "'");
  return static_cast<std::size_t>(std::stoul(token));
}

}  // namespace

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const auto magic = next_token(bytes, pos);
  if (magic != "P6")
    throw FormatError("malformed PPM header: expected binary P6, got '" + magic + "'");
  const auto width = parse_header_int(next_token(bytes, pos), "width");
  const auto height = parse_header_int(next_token(bytes, pos), "height");
  const auto maxval = parse_header_int(next_token(bytes, pos), "maxval");
  if (width == 0 || height == 0) throw FormatError("malformed PPM header: zero dimension");
  if (maxval != 255) throw FormatError("malformed PPM header: maxval must be 255, got " +
                                       std::to_string(maxval));
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("malformed PPM header: missing raster separator");
  ++pos;
  const std::size_t pixels = width * height;
  if (bytes.size() - pos < pixels * 3)
    throw FormatError("truncated PPM data: expected " + std::to_string(pixels * 3) +
                      " raster bytes, found " + std::to_string(bytes.size() - pos));
  Tensor image({3, height, width});
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      image[c * pixels + p] = static_cast<float>(bytes[pos + p * 3 + c]) / 255.0f;
  return image;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("error while reading " + path.string());
  return bytes;
}

Tensor load_ppm(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_ppm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_ppm(const Tensor& image, const fs::path& path) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("write_ppm expects [3,H,W], got " + shape_string(image.shape()));
  const std::size_t height = image.dim(1), width = image.dim(2), pixels = height * width;
  std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<char> raster(pixels * 3);
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(image[c * pixels + p], 0.0f, 1.0f);
      raster[p * 3 + c] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << header;
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor resize_nearest(const Tensor& image, std::size_t size) {
  if (image.rank() != 3) throw ShapeError("resize expects [C,H,W], got " + shape_string(image.shape()));
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  if (height == size && width == size) return image;
  Tensor out({channels, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = std::min(height - 1, (2 * y + 1) * height / (2 * size));
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = std::min(width - 1, (2 * x + 1) * width / (2 * size));
      for (std::size_t c = 0; c < channels; ++c)
        out[(c * size + y) * size + x] = image[(c * height + sy) * width + sx];
    }
  }
  return out;
}

// ---------------------------------------------------------------- directory corpus

LabeledDataset load_dataset_dir(const fs::path& root, const std::string& split,
                                std::size_t target_size) {
  if (target_size == 0) throw ConfigError("target image size must be positive");
  const fs::path split_dir = root / split;
  std::error_code ec;
  if (!fs::is_directory(split_dir, ec))
    throw DataError("split directory not found: " + split_dir.string());

  std::vector<std::string> class_names;
  for (const auto& entry : fs::directory_iterator(split_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '.') class_names.push_back(name);
  }
  if (class_names.size() < 2)
    throw DataError(split_dir.string() + ": need at least 2 class directories, found " +
                    std::to_string(class_names.size()));

  LabeledDataset ds;
  ds.labels = LabelSet(class_names);
  ds.split = split;
  for (std::size_t id = 0; id < ds.labels.size(); ++id) {
    const fs::path class_dir = split_dir / ds.labels.name(id);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      const auto name = entry.path().filename().string();
      if (!entry.is_regular_file() || name.empty() || name[0] == '.') continue;
      files.push_back(entry.path());
    }
    if (files.empty()) throw DataError("class directory has no images: " + class_dir.string());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    for (const auto& file : files) {
      if (file.extension() != ".ppm")
        throw DataError("unsupported image file " + file.string() +
                        " (convert to binary PPM first)");
      Tensor image;
      try {
        image = load_ppm(file);
      } catch (const FormatError& e) {
        throw DataError(std::string("unreadable image: ") + e.what());
      }
      ds.samples.push_back({resize_nearest(image, target_size), static_cast<std::uint16_t>(id)});
    }
  }
  return ds;
}

void write_dataset_dir(const LabeledDataset& ds, const fs::path& root) {
  const fs::path split_dir = root / ds.split;
  std::vector<std::size_t> counter(ds.labels.size(), 0);
  for (const auto& name : ds.labels.names()) fs::create_directories(split_dir / name);
  for (const auto& sample : ds.samples) {
    char file[32];
    std::snprintf(file, sizeof file, "img_%05zu.ppm", counter[sample.label]++);
    write_ppm(sample.image, split_dir / ds.labels.name(sample.label) / file);
  }
}

std::vector<std::size_t> class_frequencies(const LabeledDataset& ds) {
  if (ds.empty()) throw DataError("class frequencies of an empty dataset");
  std::vector<std::size_t> counts(ds.labels.size(), 0);
  for (const auto& s : ds.samples) {
    if (s.label >= counts.size()) throw DataError("sample label out of range");
    ++counts[s.label];
  }
  return counts;
}

std::string class_frequencies_csv(const LabeledDataset& ds) {
  const auto counts = class_frequencies(ds);
  std::ostringstream os;
  os << "class,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) os << ds.labels.name(i) << ',' << counts[i] << '\n';
  return os.str();
}

// ---------------------------------------------------------------- packed format

void pack_dataset(const LabeledDataset& ds, const fs::path& path) {
  if (ds.empty()) throw DataError("refusing to pack an empty dataset");
  ds.validate();
  detail::ByteWriter w;
  w.bytes(kPackMagic);
  w.u32(kPackVersion);
  w.u32(static_cast<std::uint32_t>(ds.labels.size()));
  for (const auto& name : ds.labels.names()) w.str(name);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  for (const auto& s : ds.samples) {
    if (s.image.dim(1) > 0xFFFF || s.image.dim(2) > 0xFFFF)
      throw DataError("image too large for the packed format");
    w.u16(s.label);
    w.u16(static_cast<std::uint16_t>(s.image.dim(1)));
    w.u16(static_cast<std::uint16_t>(s.image.dim(2)));
    for (float v : s.image.data()) w.f32(v);
  }
  w.crc_trailer();
  w.save(path);
}

LabeledDataset unpack_dataset(const fs::path& path, std::string split) {
  const auto bytes = read_file_bytes(path);
  auto r = detail::open_framed(bytes, kPackMagic, kPackVersion, path.string());
  const auto n_classes = r.u32();
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < n_classes; ++i) names.push_back(r.str());
  LabeledDataset ds;
  const auto sorted_check = names;
  ds.labels = LabelSet(std::move(names));
  if (ds.labels.names() != sorted_check) throw FormatError(path.string() + ": label block not sorted");
  ds.split = std::move(split);
  const auto n_samples = r.u32();
  ds.samples.reserve(n_samples);
  for (std::uint32_t i = 0; i < n_samples; ++i) {
    Sample s;
    s.label = r.u16();
    const std::size_t h = r.u16(), w = r.u16();
    s.image = Tensor({3, h, w});
    for (auto& v : s.image.data()) v = r.f32();
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after samples");
  ds.validate();
  return ds;
}

}  // namespace statenet
