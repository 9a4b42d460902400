#include "coml/errors.hpp"

#include <array>
#include <utility>

namespace coml {

namespace {
constexpr std::array<std::pair<ErrorCode, std::string_view>, 21> kNames{{
    {ErrorCode::GapError, "GapError"},
    {ErrorCode::MalformedOp, "MalformedOp"},
    {ErrorCode::ValidationError, "ValidationError"},
    {ErrorCode::SeqTooHigh, "SeqTooHigh"},
    {ErrorCode::UnknownProject, "UnknownProject"},
    {ErrorCode::AuthFailure, "AuthFailure"},
    {ErrorCode::DuplicateOp, "DuplicateOp"},
    {ErrorCode::MissingBlob, "MissingBlob"},
    {ErrorCode::MalformedImage, "MalformedImage"},
    {ErrorCode::UnknownDigest, "UnknownDigest"},
    {ErrorCode::InsufficientData, "InsufficientData"},
    {ErrorCode::NoTestData, "NoTestData"},
    {ErrorCode::EmptyTestSet, "EmptyTestSet"},
    {ErrorCode::NoLabels, "NoLabels"},
    {ErrorCode::EmptyWindow, "EmptyWindow"},
    {ErrorCode::ScriptError, "ScriptError"},
    {ErrorCode::Connectivity, "Connectivity"},
    {ErrorCode::Protocol, "Protocol"},
    {ErrorCode::Io, "Io"},
    {ErrorCode::BlobUnavailable, "BlobUnavailable"},
    {ErrorCode::ModelMismatch, "ModelMismatch"},
}};
}  // namespace

std::string_view to_string(ErrorCode code) {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "Unknown";
}

ErrorCode error_code_from_string(std::string_view name) {
    for (const auto& [c, n] : kNames) {
        if (n == name) return c;
    }
    return ErrorCode::Protocol;
}

}  // namespace coml
