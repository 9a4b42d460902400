#include "coml/domain.hpp"

#include "coml/errors.hpp"

namespace coml {

std::string_view to_string(Split split) { return split == Split::Training ? "training" : "testing"; }

Split split_from_string(std::string_view text) {
    if (text == "training") return Split::Training;
    if (text == "testing") return Split::Testing;
    throw Error(ErrorCode::ValidationError, "unknown split '" + std::string(text) + "'");
}

bool DatasetState::label_live(const LabelId& id) const {
    auto it = labels.find(id);
    return it != labels.end() && !it->second.deleted;
}

bool DatasetState::sample_live(const SampleId& id) const {
    auto it = samples.find(id);
    return it != samples.end() && !it->second.deleted;
}

const Label* DatasetState::find_live_label_by_name(std::string_view name) const {
    const Label* best = nullptr;
    for (const auto& [id, label] : labels) {
        if (label.deleted || label.name != name) continue;
        if (best == nullptr || label.name_stamp < best->name_stamp) best = &label;
    }
    return best;
}

std::string DatasetState::display_name(const LabelId& id) const {
    auto it = labels.find(id);
    if (it == labels.end()) return id.short_str();
    const Label& label = it->second;
    for (const auto& [other_id, other] : labels) {
        if (other_id == id || other.deleted || other.name != label.name) continue;
        if (other.name_stamp < label.name_stamp) return label.name + "#" + id.short_str();
    }
    return label.name;
}

std::string trim(std::string_view s) {
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::size_t utf8_length(std::string_view s) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.size();) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            len = 1;
            cp = c;
        } else if ((c & 0xe0) == 0xc0) {
            len = 2;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            len = 3;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return std::string_view::npos;
        }
        if (i + len > s.size()) return std::string_view::npos;
        for (std::size_t k = 1; k < len; ++k) {
            auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xc0) != 0x80) return std::string_view::npos;
            cp = (cp << 6) | (cc & 0x3f);
        }
        // reject overlong encodings, surrogates and out-of-range code points
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            (cp >= 0xd800 && cp <= 0xdfff) || cp > 0x10ffff) {
            return std::string_view::npos;
        }
        i += len;
        ++count;
    }
    return count;
}

bool valid_label_name(std::string_view name) {
    std::size_t n = utf8_length(name);
    return n != std::string_view::npos && n >= 1 && n <= kMaxLabelNameChars && trim(name) == name;
}

bool valid_tag(std::string_view tag) {
    if (tag.empty() || tag.size() > kMaxTagBytes) return false;
    if (utf8_length(tag) == std::string_view::npos) return false;
    for (char c : tag) {
        if (static_cast<unsigned char>(c) < 0x20 || c == 0x7f) return false;
    }
    return true;
}

bool valid_tags(const std::set<std::string>& tags) {
    if (tags.size() > kMaxTagsPerSample) return false;
    for (const auto& t : tags) {
        if (!valid_tag(t)) return false;
    }
    return true;
}

}  // namespace coml
