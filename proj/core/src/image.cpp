#include "coml/image.hpp"

#include "coml/errors.hpp"

#include <fstream>
#include <iterator>

namespace coml {

namespace {

std::string ppm_header(std::uint32_t w, std::uint32_t h) {
    return "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

ImageBlob::ImageBlob(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width_ < 1 || width_ > kMaxImageSide || height_ < 1 || height_ > kMaxImageSide) {
        throw Error(ErrorCode::MalformedImage,
                    "dimensions " + std::to_string(width_) + "x" + std::to_string(height_) + " out of range");
    }
    if (pixels_.size() != static_cast<std::size_t>(width_) * height_ * 3) {
        throw Error(ErrorCode::MalformedImage, "pixel buffer length does not match dimensions");
    }
    Sha256 h;
    h.update(ppm_header(width_, height_));
    h.update(pixels_);
    digest_ = h.finish();
}

std::vector<std::uint8_t> encode_ppm(const ImageBlob& image) {
    std::string header = ppm_header(image.width(), image.height());
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels().begin(), image.pixels().end());
    return out;
}

ImageBlob decode_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto fail = [](const std::string& why) -> ImageBlob { throw Error(ErrorCode::MalformedImage, why); };

    if (bytes.size() < 3 || bytes[0] != 'P' || bytes[1] != '6' || !is_space(bytes[2])) {
        return fail("missing P6 magic");
    }
    pos = 3;

    auto read_number = [&](const char* what) -> std::uint64_t {
        while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
        std::uint64_t v = 0;
        std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000) throw Error(ErrorCode::MalformedImage, std::string(what) + " too large");
            ++pos;
        }
        if (pos == start) throw Error(ErrorCode::MalformedImage, std::string("expected ") + what);
        return v;
    };

    std::uint64_t w = read_number("width");
    std::uint64_t h = read_number("height");
    std::uint64_t maxval = read_number("maxval");
    if (maxval != 255) return fail("maxval must be 255");
    if (pos >= bytes.size() || !is_space(bytes[pos])) return fail("missing whitespace after maxval");
    ++pos;
    if (w < 1 || w > kMaxImageSide || h < 1 || h > kMaxImageSide) return fail("dimensions out of range");

    std::size_t expected = static_cast<std::size_t>(w * h * 3);
    if (bytes.size() - pos != expected) {
        return fail("pixel payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                    std::to_string(expected));
    }
    std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return ImageBlob(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h), std::move(pixels));
}

ImageBlob read_ppm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_ppm(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.detail());
    }
}

void write_ppm_file(const std::filesystem::path& path, const ImageBlob& image) {
    auto bytes = encode_ppm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace coml
