#include "coml/ids.hpp"

#include "coml/errors.hpp"

#include <openssl/rand.h>

namespace coml {

namespace detail {

std::string format_id(const std::array<std::uint8_t, 16>& bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(36);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
        out.push_back(kHex[bytes[i] >> 4]);
        out.push_back(kHex[bytes[i] & 0xf]);
    }
    return out;
}

std::optional<std::array<std::uint8_t, 16>> parse_id(std::string_view text) {
    if (text.size() != 36) return std::nullopt;
    std::array<std::uint8_t, 16> out{};
    std::size_t byte = 0;
    int nibble = -1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (i == 8 || i == 13 || i == 18 || i == 23) {
            if (c != '-') return std::nullopt;
            continue;
        }
        int v;
        if (c >= '0' && c <= '9') {
            v = c - '0';
        } else if (c >= 'a' && c <= 'f') {
            v = c - 'a' + 10;
        } else {
            return std::nullopt;  // canonical form is lowercase only
        }
        if (nibble < 0) {
            nibble = v;
        } else {
            out[byte++] = static_cast<std::uint8_t>((nibble << 4) | v);
            nibble = -1;
        }
    }
    return out;
}

}  // namespace detail

IdSource::IdSource() = default;

IdSource::IdSource(std::uint64_t seed) : rng_(std::mt19937_64(seed)) {}

std::array<std::uint8_t, 16> IdSource::next_bytes() {
    std::array<std::uint8_t, 16> out{};
    std::lock_guard lock(mu_);
    if (rng_) {
        for (int half = 0; half < 2; ++half) {
            std::uint64_t v = (*rng_)();
            for (int i = 0; i < 8; ++i) out[half * 8 + i] = static_cast<std::uint8_t>(v >> (8 * i));
        }
    } else {
        secure_random(out.data(), out.size());
    }
    return out;
}

void secure_random(std::uint8_t* out, std::size_t len) {
    if (RAND_bytes(out, static_cast<int>(len)) != 1) {
        throw Error(ErrorCode::Io, "OS random source unavailable");
    }
}

}  // namespace coml
