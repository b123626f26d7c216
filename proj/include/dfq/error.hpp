#pragma once

#include <stdexcept>
#include <string>

namespace dfq {

enum class ErrorCode {
    ZeroMassInterval,
    DegenerateData,
    InvalidBitWidth,
    InvalidArgument,
    NoConvergence,
    ShapeMismatch,
    NonFiniteValue,
    CodeOutOfRange,
    FormatError,
    IoError,
};

const char *to_string(ErrorCode code) noexcept;

// Base for every error raised by the library. The code is what callers
// should switch on; the message carries context for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline const char *to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ZeroMassInterval: return "ZeroMassInterval";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::InvalidBitWidth: return "InvalidBitWidth";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace dfq
