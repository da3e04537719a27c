// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace layerprobe {

/// The four probed descriptors. The numeric values are the FEA1 kind tags.
enum class RepKind : std::uint8_t { Spat3x3 = 0, Spat1x1 = 1, FC1 = 2, FC2 = 3 };

inline constexpr std::array<RepKind, 4> kAllKinds = {RepKind::Spat3x3, RepKind::Spat1x1, RepKind::FC1,
                                                     RepKind::FC2};

inline constexpr std::size_t kind_index(RepKind k) noexcept { return static_cast<std::size_t>(k); }

/// Short tag used in manifests, file names and the --kinds flag.
std::string_view kind_tag(RepKind k) noexcept;
std::optional<RepKind> kind_from_tag(std::string_view tag) noexcept;

inline constexpr bool is_spatial(RepKind k) noexcept { return k == RepKind::Spat3x3 || k == RepKind::Spat1x1; }

/// Side of the pooled map for spatial kinds (3 or 1).
inline constexpr std::uint32_t pooled_side(RepKind k) noexcept { return k == RepKind::Spat3x3 ? 3 : 1; }

}  // namespace layerprobe
