// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/core.h>

#include "layerprobe/error.hpp"

namespace layerprobe {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void ByteWriter::bytes(std::span<const std::uint8_t> data) {
  buf_.insert(buf_.end(), data.begin(), data.end());
}

void ByteWriter::text(std::string_view s) {
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(v); }

void ByteWriter::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v & 0xFF));
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32s(std::span<const float> values) {
  const auto old = buf_.size();
  buf_.resize(old + values.size() * sizeof(float));
  std::memcpy(buf_.data() + old, values.data(), values.size() * sizeof(float));
}

void ByteReader::need(std::size_t n, std::string_view what) const {
  if (remaining() < n) {
    throw Error(Errc::TruncatedFile,
                fmt::format("offset {}: need {} bytes for {}, {} left", pos_, n, what, remaining()));
  }
}

void ByteReader::expect_magic(std::string_view magic) {
  if (remaining() < magic.size() ||
      std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
    throw Error(Errc::BadMagic, fmt::format("offset {}: expected \"{}\"", pos_, magic));
  }
  pos_ += magic.size();
}

std::string ByteReader::text(std::size_t n, std::string_view what) {
  need(n, what);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8(std::string_view what) {
  need(1, what);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16(std::string_view what) {
  need(2, what);
  const auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32(std::string_view what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

float ByteReader::f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

std::vector<float> ByteReader::f32s(std::size_t n, std::string_view what) {
  if (n > remaining() / sizeof(float)) need(n * sizeof(float), what);
  std::vector<float> out(n);
  std::memcpy(out.data(), data_.data() + pos_, n * sizeof(float));
  pos_ += n * sizeof(float);
  return out;
}

void ByteReader::expect_end() const {
  if (!at_end()) {
    throw Error(Errc::TrailingBytes, fmt::format("offset {}: {} unexpected bytes", pos_, remaining()));
  }
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, fmt::format("{}: cannot open for reading", path.string()));
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, fmt::format("{}: cannot open for reading", path.string()));
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, fmt::format("{}: cannot open for writing", tmp.string()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(Errc::IoError, fmt::format("{}: write failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, fmt::format("{}: rename failed: {}", path.string(), ec.message()));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace layerprobe
