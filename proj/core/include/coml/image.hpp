#pragma once

#include "coml/hash.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coml {

inline constexpr std::uint32_t kMaxImageSide = 4096;

/// Raw RGB8 image, row-major, with a content digest.
///
/// The digest is the SHA-256 of the canonical P6 encoding, so it depends on
/// (width, height, pixels) only.
class ImageBlob {
public:
    /// Throws MalformedImage if dimensions are out of range or the pixel
    /// buffer length is not 3 * width * height.
    ImageBlob(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels);

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    const std::vector<std::uint8_t>& pixels() const { return pixels_; }
    const Digest& digest() const { return digest_; }

    std::uint8_t at(std::uint32_t x, std::uint32_t y, int channel) const {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + channel];
    }

    friend bool operator==(const ImageBlob& a, const ImageBlob& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
    }

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<std::uint8_t> pixels_;
    Digest digest_;
};

/// Canonical P6 encoding: "P6\n<w> <h>\n255\n" followed by the raw pixels.
std::vector<std::uint8_t> encode_ppm(const ImageBlob& image);

/// Strict P6 parser: magic "P6" plus one whitespace byte, decimal width and
/// height, maxval 255, exactly one whitespace byte, then exactly 3*w*h bytes.
/// Comments are not accepted.
ImageBlob decode_ppm(std::span<const std::uint8_t> bytes);

ImageBlob read_ppm_file(const std::filesystem::path& path);
void write_ppm_file(const std::filesystem::path& path, const ImageBlob& image);

}  // namespace coml
