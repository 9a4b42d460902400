#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace coml {

namespace detail {
std::string format_id(const std::array<std::uint8_t, 16>& bytes);
std::optional<std::array<std::uint8_t, 16>> parse_id(std::string_view text);
}  // namespace detail

/// 128-bit identifier, rendered as lowercase 8-4-4-4-12 hex. Ordering is
/// bytewise, which matches lexicographic ordering of the rendered form.
template <class Tag>
struct Id {
    std::array<std::uint8_t, 16> bytes{};

    bool is_nil() const {
        for (auto b : bytes) {
            if (b != 0) return false;
        }
        return true;
    }

    std::string str() const { return detail::format_id(bytes); }

    /// First 8 hex digits, used for display disambiguation.
    std::string short_str() const { return str().substr(0, 8); }

    static std::optional<Id> parse(std::string_view text) {
        auto raw = detail::parse_id(text);
        if (!raw) return std::nullopt;
        return Id{*raw};
    }

    friend auto operator<=>(const Id&, const Id&) = default;
    friend bool operator==(const Id&, const Id&) = default;
};

struct ProjectTag {};
struct DeviceTag {};
struct LabelTag {};
struct SampleTag {};
struct OpTag {};
struct EventTag {};

using ProjectId = Id<ProjectTag>;
using DeviceId = Id<DeviceTag>;
using LabelId = Id<LabelTag>;
using SampleId = Id<SampleTag>;
using OpId = Id<OpTag>;
using EventId = Id<EventTag>;

/// Source of fresh identifiers. A seeded source is fully reproducible (used
/// by scripted sessions and tests); an unseeded one draws from the OS CSPRNG.
class IdSource {
public:
    IdSource();
    explicit IdSource(std::uint64_t seed);

    template <class T>
    T next() {
        return T{next_bytes()};
    }

    std::array<std::uint8_t, 16> next_bytes();

private:
    std::mutex mu_;
    std::optional<std::mt19937_64> rng_;
};

/// Fills `out` from the OS CSPRNG.
void secure_random(std::uint8_t* out, std::size_t len);

}  // namespace coml

template <class Tag>
struct std::hash<coml::Id<Tag>> {
    std::size_t operator()(const coml::Id<Tag>& id) const noexcept {
        std::size_t h = 0;
        for (auto b : id.bytes) h = h * 131 + b;
        return h;
    }
};
