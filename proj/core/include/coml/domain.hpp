#pragma once

#include "coml/hash.hpp"
#include "coml/ids.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace coml {

enum class Split : std::uint8_t { Training = 0, Testing = 1 };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

/// Last-writer-wins stamp; compared lexicographically on (lamport, device).
struct Stamp {
    std::uint64_t lamport = 0;
    DeviceId device;

    friend auto operator<=>(const Stamp&, const Stamp&) = default;
    friend bool operator==(const Stamp&, const Stamp&) = default;
};

struct BlobRef {
    Digest digest;
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    friend bool operator==(const BlobRef&, const BlobRef&) = default;
};

struct Label {
    LabelId id;
    std::string name;
    Stamp name_stamp;
    bool deleted = false;

    friend bool operator==(const Label&, const Label&) = default;
};

struct Sample {
    SampleId id;
    LabelId label;
    Split split = Split::Training;
    BlobRef blob;
    DeviceId created_by;
    std::int64_t created_at = 0;  // wall-clock ms
    std::uint64_t seq = 0;        // 0 = not yet sequenced
    std::set<std::string> tags;
    bool deleted = false;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Labels and samples, keyed by id. Ordered maps keep iteration canonical.
struct DatasetState {
    std::map<LabelId, Label> labels;
    std::map<SampleId, Sample> samples;

    bool label_live(const LabelId& id) const;
    bool sample_live(const SampleId& id) const;
    const Label* find_live_label_by_name(std::string_view name) const;

    /// Name shown to users. When a race left two live labels with the same
    /// name, the later-stamped one gets "#<short-id>" appended.
    std::string display_name(const LabelId& id) const;

    friend bool operator==(const DatasetState&, const DatasetState&) = default;
};

inline constexpr std::size_t kMaxLabelNameChars = 64;
inline constexpr std::size_t kMaxTagBytes = 64;
inline constexpr std::size_t kMaxTagsPerSample = 32;

/// Trims ASCII whitespace from both ends.
std::string trim(std::string_view s);

/// Number of code points, or npos if `s` is not valid UTF-8.
std::size_t utf8_length(std::string_view s);

/// A stored label name is valid UTF-8, already trimmed, and 1..64 code points.
bool valid_label_name(std::string_view name);
bool valid_tag(std::string_view tag);
bool valid_tags(const std::set<std::string>& tags);

}  // namespace coml
