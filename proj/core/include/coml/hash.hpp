#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coml {

/// SHA-256 value; rendered as 64 lowercase hex digits.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    std::string hex() const;
    static std::optional<Digest> parse(std::string_view hex);

    friend auto operator<=>(const Digest&, const Digest&) = default;
    friend bool operator==(const Digest&, const Digest&) = default;
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

/// Incremental hasher for data that is produced piecewise.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::uint8_t> data);
    void update(std::string_view data);
    Digest finish();

private:
    void* ctx_;
};

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace coml

template <>
struct std::hash<coml::Digest> {
    std::size_t operator()(const coml::Digest& d) const noexcept {
        std::size_t h = 0;
        for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
        return h;
    }
};
