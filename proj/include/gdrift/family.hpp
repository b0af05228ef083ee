#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace gdrift {

// Descriptor families of the multi-level feature bank.
enum class Family { Energy, Global, Local, Spatial2, Spatial4 };

inline constexpr std::array<Family, 5> kAllFamilies = {
    Family::Energy, Family::Global, Family::Local, Family::Spatial2, Family::Spatial4};

constexpr std::string_view family_name(Family f) {
  switch (f) {
    case Family::Energy: return "energy";
    case Family::Global: return "global";
    case Family::Local: return "local";
    case Family::Spatial2: return "spatial_2";
    case Family::Spatial4: return "spatial_4";
  }
  return "unknown";
}

constexpr std::optional<Family> family_from_name(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

}  // namespace gdrift
