#include "binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>

namespace statenet::detail {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void ByteReader::need(std::size_t n) {
  if (remaining() < n)
    throw FormatError(what_ + ": truncated data (needed " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ")");
}

std::uint64_t ByteReader::get(int n) {
  need(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

ByteReader open_framed(std::span<const std::uint8_t> bytes, std::string_view magic,
                       std::uint32_t version, const std::string& what) {
  const std::size_t header = magic.size() + 4;
  if (bytes.size() < header + 4) throw FormatError(what + ": file too short");
  if (std::string_view(reinterpret_cast<const char*>(bytes.data()), magic.size()) != magic)
    throw FormatError(what + ": bad magic (expected \"" + std::string(magic) + "\")");
  ByteReader head(bytes.subspan(magic.size(), 4), what);
  const auto found = head.u32();
  if (found != version)
    throw FormatError(what + ": unsupported version " + std::to_string(found) + " (expected " +
                      std::to_string(version) + ")");
  const auto body_end = bytes.size() - 4;
  ByteReader tail(bytes.subspan(body_end), what);
  const auto stored = tail.u32();
  if (stored != crc32_of(bytes.first(body_end)))
    throw FormatError(what + ": checksum mismatch (file corrupted or truncated)");
  return ByteReader(bytes.subspan(header, body_end - header), what);
}

}  // namespace statenet::detail
