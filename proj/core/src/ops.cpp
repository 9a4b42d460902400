#include "coml/ops.hpp"

#include "coml/errors.hpp"

namespace coml {

using nlohmann::json;

namespace {

template <class T>
T parse_id_field(const json& j, const char* field) {
    if (!j.contains(field) || !j.at(field).is_string()) {
        throw Error(ErrorCode::MalformedOp, std::string("missing id field '") + field + "'");
    }
    auto id = T::parse(j.at(field).get<std::string>());
    if (!id) throw Error(ErrorCode::MalformedOp, std::string("bad id in '") + field + "'");
    return *id;
}

const json& field(const json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) {
        throw Error(ErrorCode::MalformedOp, std::string("missing field '") + name + "'");
    }
    return j.at(name);
}

std::string string_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) throw Error(ErrorCode::MalformedOp, std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

std::uint64_t u64_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw Error(ErrorCode::MalformedOp, std::string("field '") + name + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::set<std::string> tags_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_array()) throw Error(ErrorCode::MalformedOp, std::string("field '") + name + "' must be an array");
    std::set<std::string> out;
    for (const auto& t : v) {
        if (!t.is_string()) throw Error(ErrorCode::MalformedOp, "tags must be strings");
        out.insert(t.get<std::string>());
    }
    return out;
}

json stamp_json(const Stamp& s) { return json{{"lamport", s.lamport}, {"device", s.device.str()}}; }

Stamp stamp_from(const json& j) {
    return Stamp{u64_field(j, "lamport"), parse_id_field<DeviceId>(j, "device")};
}

}  // namespace

template <class T>
T id_from_json(const json& j, const char* name) {
    return parse_id_field<T>(j, name);
}

template ProjectId id_from_json<ProjectId>(const json&, const char*);
template DeviceId id_from_json<DeviceId>(const json&, const char*);
template LabelId id_from_json<LabelId>(const json&, const char*);
template SampleId id_from_json<SampleId>(const json&, const char*);
template OpId id_from_json<OpId>(const json&, const char*);
template EventId id_from_json<EventId>(const json&, const char*);

std::string_view kind_name(const OpKind& kind) {
    return std::visit(
        [](const auto& k) -> std::string_view {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, op::AddLabel>) return "AddLabel";
            else if constexpr (std::is_same_v<K, op::RenameLabel>) return "RenameLabel";
            else if constexpr (std::is_same_v<K, op::DeleteLabel>) return "DeleteLabel";
            else if constexpr (std::is_same_v<K, op::AddSample>) return "AddSample";
            else if constexpr (std::is_same_v<K, op::DeleteSample>) return "DeleteSample";
            else if constexpr (std::is_same_v<K, op::TagSample>) return "TagSample";
            else return "RelabelSample";
        },
        kind);
}

json to_json(const Sample& s) {
    json tags = json::array();
    for (const auto& t : s.tags) tags.push_back(t);
    return json{{"id", s.id.str()},
                {"label", s.label.str()},
                {"split", std::string(to_string(s.split))},
                {"blob", {{"digest", s.blob.digest.hex()}, {"width", s.blob.width}, {"height", s.blob.height}}},
                {"created_by", s.created_by.str()},
                {"created_at", s.created_at},
                {"tags", std::move(tags)}};
}

Sample sample_from_json(const json& j) {
    Sample s;
    s.id = parse_id_field<SampleId>(j, "id");
    s.label = parse_id_field<LabelId>(j, "label");
    try {
        s.split = split_from_string(string_field(j, "split"));
    } catch (const Error&) {
        throw Error(ErrorCode::MalformedOp, "bad split");
    }
    const json& blob = field(j, "blob");
    auto digest = Digest::parse(string_field(blob, "digest"));
    if (!digest) throw Error(ErrorCode::MalformedOp, "bad blob digest");
    s.blob.digest = *digest;
    s.blob.width = static_cast<std::uint32_t>(u64_field(blob, "width"));
    s.blob.height = static_cast<std::uint32_t>(u64_field(blob, "height"));
    s.created_by = parse_id_field<DeviceId>(j, "created_by");
    const json& created = field(j, "created_at");
    if (!created.is_number_integer()) throw Error(ErrorCode::MalformedOp, "created_at must be an integer");
    s.created_at = created.get<std::int64_t>();
    s.tags = tags_field(j, "tags");
    return s;
}

json to_json(const DatasetOp& o) {
    json kind = std::visit(
        [](const auto& k) -> json {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, op::AddLabel>) {
                return {{"type", "AddLabel"}, {"label_id", k.label_id.str()}, {"name", k.name}};
            } else if constexpr (std::is_same_v<K, op::RenameLabel>) {
                return {{"type", "RenameLabel"},
                        {"label_id", k.label_id.str()},
                        {"name", k.name},
                        {"name_stamp", stamp_json(k.name_stamp)}};
            } else if constexpr (std::is_same_v<K, op::DeleteLabel>) {
                return {{"type", "DeleteLabel"}, {"label_id", k.label_id.str()}};
            } else if constexpr (std::is_same_v<K, op::AddSample>) {
                return {{"type", "AddSample"}, {"sample", to_json(k.sample)}};
            } else if constexpr (std::is_same_v<K, op::DeleteSample>) {
                return {{"type", "DeleteSample"}, {"sample_id", k.sample_id.str()}};
            } else if constexpr (std::is_same_v<K, op::TagSample>) {
                json tags = json::array();
                for (const auto& t : k.tags) tags.push_back(t);
                return {{"type", "TagSample"}, {"sample_id", k.sample_id.str()}, {"tags", std::move(tags)}};
            } else {
                return {{"type", "RelabelSample"}, {"sample_id", k.sample_id.str()}, {"label_id", k.label_id.str()}};
            }
        },
        o.kind);
    return json{{"op_id", o.op_id.str()},
                {"device", o.device.str()},
                {"lamport", o.lamport},
                {"kind", std::move(kind)},
                {"seq", o.seq}};
}

DatasetOp op_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedOp, "op must be an object");
    DatasetOp o;
    o.op_id = parse_id_field<OpId>(j, "op_id");
    o.device = parse_id_field<DeviceId>(j, "device");
    o.lamport = u64_field(j, "lamport");
    o.seq = j.contains("seq") ? u64_field(j, "seq") : 0;
    const json& k = field(j, "kind");
    std::string type = string_field(k, "type");
    if (type == "AddLabel") {
        o.kind = op::AddLabel{parse_id_field<LabelId>(k, "label_id"), string_field(k, "name")};
    } else if (type == "RenameLabel") {
        o.kind = op::RenameLabel{parse_id_field<LabelId>(k, "label_id"), string_field(k, "name"),
                                 stamp_from(field(k, "name_stamp"))};
    } else if (type == "DeleteLabel") {
        o.kind = op::DeleteLabel{parse_id_field<LabelId>(k, "label_id")};
    } else if (type == "AddSample") {
        o.kind = op::AddSample{sample_from_json(field(k, "sample"))};
    } else if (type == "DeleteSample") {
        o.kind = op::DeleteSample{parse_id_field<SampleId>(k, "sample_id")};
    } else if (type == "TagSample") {
        o.kind = op::TagSample{parse_id_field<SampleId>(k, "sample_id"), tags_field(k, "tags")};
    } else if (type == "RelabelSample") {
        o.kind = op::RelabelSample{parse_id_field<SampleId>(k, "sample_id"), parse_id_field<LabelId>(k, "label_id")};
    } else {
        throw Error(ErrorCode::MalformedOp, "unknown op kind '" + type + "'");
    }
    return o;
}

void validate_schema(const DatasetOp& o) {
    if (o.op_id.is_nil()) throw Error(ErrorCode::MalformedOp, "nil op_id");
    if (o.device.is_nil()) throw Error(ErrorCode::MalformedOp, "nil device");
    if (o.lamport == 0) throw Error(ErrorCode::MalformedOp, "lamport must be positive");
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, op::AddLabel>) {
                if (k.label_id.is_nil()) throw Error(ErrorCode::MalformedOp, "nil label_id");
                if (!valid_label_name(k.name)) throw Error(ErrorCode::MalformedOp, "invalid label name");
            } else if constexpr (std::is_same_v<K, op::RenameLabel>) {
                if (!valid_label_name(k.name)) throw Error(ErrorCode::MalformedOp, "invalid label name");
                if (k.name_stamp != Stamp{o.lamport, o.device}) {
                    throw Error(ErrorCode::MalformedOp, "name_stamp must equal (lamport, device)");
                }
            } else if constexpr (std::is_same_v<K, op::AddSample>) {
                const Sample& s = k.sample;
                if (s.id.is_nil() || s.label.is_nil()) throw Error(ErrorCode::MalformedOp, "nil sample or label id");
                if (s.blob.width < 1 || s.blob.width > 4096 || s.blob.height < 1 || s.blob.height > 4096) {
                    throw Error(ErrorCode::MalformedOp, "blob dimensions out of range");
                }
                if (s.created_by != o.device) throw Error(ErrorCode::MalformedOp, "created_by must equal device");
                if (!valid_tags(s.tags)) throw Error(ErrorCode::MalformedOp, "invalid tags");
            } else if constexpr (std::is_same_v<K, op::TagSample>) {
                if (!valid_tags(k.tags)) throw Error(ErrorCode::MalformedOp, "invalid tags");
            }
        },
        o.kind);
}

}  // namespace coml
