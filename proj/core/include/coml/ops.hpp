#pragma once

#include "coml/domain.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <variant>

namespace coml {

namespace op {

struct AddLabel {
    LabelId label_id;
    std::string name;
    friend bool operator==(const AddLabel&, const AddLabel&) = default;
};

struct RenameLabel {
    LabelId label_id;
    std::string name;
    Stamp name_stamp;
    friend bool operator==(const RenameLabel&, const RenameLabel&) = default;
};

struct DeleteLabel {
    LabelId label_id;
    friend bool operator==(const DeleteLabel&, const DeleteLabel&) = default;
};

/// Carries the sample as created; seq and deleted are ignored on the wire.
struct AddSample {
    Sample sample;
    friend bool operator==(const AddSample&, const AddSample&) = default;
};

struct DeleteSample {
    SampleId sample_id;
    friend bool operator==(const DeleteSample&, const DeleteSample&) = default;
};

/// Replaces the sample's tag set.
struct TagSample {
    SampleId sample_id;
    std::set<std::string> tags;
    friend bool operator==(const TagSample&, const TagSample&) = default;
};

/// Moves a sample to another label (user correction of a test verdict).
struct RelabelSample {
    SampleId sample_id;
    LabelId label_id;
    friend bool operator==(const RelabelSample&, const RelabelSample&) = default;
};

}  // namespace op

using OpKind = std::variant<op::AddLabel, op::RenameLabel, op::DeleteLabel, op::AddSample, op::DeleteSample,
                            op::TagSample, op::RelabelSample>;

struct DatasetOp {
    OpId op_id;
    DeviceId device;
    std::uint64_t lamport = 0;
    OpKind kind;
    std::uint64_t seq = 0;  // assigned by the sequencer

    friend bool operator==(const DatasetOp&, const DatasetOp&) = default;
};

std::string_view kind_name(const OpKind& kind);

/// Schema check independent of replica state. Throws MalformedOp.
void validate_schema(const DatasetOp& op);

/// Wire encoding. Field names follow DatasetOp; `kind` is an object whose
/// `type` member names the variant.
nlohmann::json to_json(const DatasetOp& op);
DatasetOp op_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& j);

template <class T>
T id_from_json(const nlohmann::json& j, const char* field);

}  // namespace coml
