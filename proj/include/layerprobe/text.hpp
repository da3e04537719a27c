// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace layerprobe::text {

/// Splits on '\n', dropping a trailing '\r' from each line. Line numbers in
/// error messages are the 1-based index into this vector.
std::vector<std::string_view> lines(std::string_view doc);

std::vector<std::string_view> fields(std::string_view line);

std::string_view trim(std::string_view s);

std::optional<std::uint32_t> parse_u32(std::string_view s);
std::optional<std::int64_t> parse_i64(std::string_view s);
/// Finite decimal only; "nan"/"inf" are rejected.
std::optional<double> parse_double(std::string_view s);
std::optional<float> parse_float(std::string_view s);

/// Shortest decimal that parses back to the same value.
std::string format_float(float v);
std::string format_double(double v);

}  // namespace layerprobe::text
