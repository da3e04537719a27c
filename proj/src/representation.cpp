// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/representation.hpp"

namespace layerprobe {

std::string_view kind_tag(RepKind k) noexcept {
  switch (k) {
    case RepKind::Spat3x3: return "spat3";
    case RepKind::Spat1x1: return "spat1";
    case RepKind::FC1: return "fc1";
    case RepKind::FC2: return "fc2";
  }
  return "?";
}

std::optional<RepKind> kind_from_tag(std::string_view tag) noexcept {
  for (auto k : kAllKinds) {
    if (kind_tag(k) == tag) return k;
  }
  return std::nullopt;
}

}  // namespace layerprobe
