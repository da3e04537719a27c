// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/text.hpp"

#include <charconv>
#include <cmath>

namespace layerprobe::text {

std::vector<std::string_view> lines(std::string_view doc) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= doc.size()) {
    auto end = doc.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < doc.size()) out.push_back(doc.substr(start));
      break;
    }
    auto line = doc.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

namespace {

template <class T>
std::optional<T> parse_whole(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::optional<std::uint32_t> parse_u32(std::string_view s) { return parse_whole<std::uint32_t>(s); }
std::optional<std::int64_t> parse_i64(std::string_view s) { return parse_whole<std::int64_t>(s); }

std::optional<double> parse_double(std::string_view s) {
  auto v = parse_whole<double>(s);
  if (!v || !std::isfinite(*v)) return std::nullopt;
  return v;
}

std::optional<float> parse_float(std::string_view s) {
  auto v = parse_whole<float>(s);
  if (!v || !std::isfinite(*v)) return std::nullopt;
  return v;
}

std::string format_float(float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace layerprobe::text
