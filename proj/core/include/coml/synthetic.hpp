#pragma once

#include "coml/image.hpp"

#include <array>
#include <cstdint>
#include <string_view>

namespace coml {

/// Parameters of a generated test image: a base color with uniform
/// per-channel noise and an optional skin-toned patch.
struct SyntheticSpec {
    std::uint32_t width = 32;
    std::uint32_t height = 32;
    std::array<std::uint8_t, 3> color{128, 128, 128};
    std::uint8_t jitter = 24;  // noise amplitude, uniform in [-jitter, jitter]
    bool hand = false;         // lower-left patch in a fixed skin tone
};

/// Deterministic for a given (spec, seed).
ImageBlob synthetic_image(const SyntheticSpec& spec, std::uint64_t seed);

/// Stable, well-spread color derived from a name.
std::array<std::uint8_t, 3> color_for_name(std::string_view name);

}  // namespace coml
