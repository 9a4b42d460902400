#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coml {

enum class ErrorCode {
    GapError,
    MalformedOp,
    ValidationError,
    SeqTooHigh,
    UnknownProject,
    AuthFailure,
    DuplicateOp,
    MissingBlob,
    MalformedImage,
    UnknownDigest,
    InsufficientData,
    NoTestData,
    EmptyTestSet,
    NoLabels,
    EmptyWindow,
    ScriptError,
    Connectivity,
    Protocol,
    Io,
    BlobUnavailable,
    ModelMismatch,
};

std::string_view to_string(ErrorCode code);
ErrorCode error_code_from_string(std::string_view name);

/// Every failure surfaced by the library carries one of the codes above;
/// the wire ERROR message transmits the code name verbatim.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail),
          code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace coml
