// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace layerprobe {

using Bytes = std::vector<std::uint8_t>;

// Little-endian appender used by every binary format in the project.
class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data);
  void text(std::string_view s);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f32s(std::span<const float> values);

  const Bytes& buffer() const noexcept { return buf_; }
  Bytes take() noexcept { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Bounds-checked little-endian cursor. Running past the end raises
// TruncatedFile naming the byte offset and what was being read.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void expect_magic(std::string_view magic);
  std::string text(std::size_t n, std::string_view what);
  std::uint8_t u8(std::string_view what);
  std::uint16_t u16(std::string_view what);
  std::uint32_t u32(std::string_view what);
  float f32(std::string_view what);
  std::vector<float> f32s(std::size_t n, std::string_view what);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }
  // Raises TrailingBytes unless the whole buffer has been consumed.
  void expect_end() const;

 private:
  void need(std::size_t n, std::string_view what) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes to "<path>.tmp" and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace layerprobe
