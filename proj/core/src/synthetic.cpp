#include "coml/synthetic.hpp"

#include "coml/trainer.hpp"

#include <algorithm>
#include <random>

namespace coml {

ImageBlob synthetic_image(const SyntheticSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
    std::vector<std::uint8_t> px(n * 3);
    const int span = 2 * spec.jitter + 1;
    for (std::uint32_t y = 0; y < spec.height; ++y) {
        for (std::uint32_t x = 0; x < spec.width; ++x) {
            const bool in_hand = spec.hand && x < spec.width / 2 && y >= spec.height / 2;
            static constexpr std::array<std::uint8_t, 3> kSkin{224, 172, 105};
            for (int c = 0; c < 3; ++c) {
                const int base = in_hand ? kSkin[c] : spec.color[c];
                const int noise = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(span))) - spec.jitter;
                px[(static_cast<std::size_t>(y) * spec.width + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(base + noise, 0, 255));
            }
        }
    }
    return ImageBlob(spec.width, spec.height, std::move(px));
}

std::array<std::uint8_t, 3> color_for_name(std::string_view name) {
    const Digest d = sha256(name);
    // keep channels away from the extremes so noise does not clip much
    return {static_cast<std::uint8_t>(32 + d.bytes[0] % 192), static_cast<std::uint8_t>(32 + d.bytes[1] % 192),
            static_cast<std::uint8_t>(32 + d.bytes[2] % 192)};
}

}  // namespace coml
