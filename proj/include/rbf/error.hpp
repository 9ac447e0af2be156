#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rbf {

enum class ErrorCode {
    DimensionMismatch,
    InvalidInput,
    NotPositiveDefinite,
    ZeroExposure,
    UnsupportedInput,
    SingularProjection,
    MaxIterations,
    Diverged,
    NormalizationDegenerate,
    InfeasibleLongOnly,
    InfeasibleExposures,
    ZeroTotal,
    RankLost,
    InsufficientData,
    ParseError,
    NonMonotoneDates,
    NonFiniteValue,
    SchemaError,
    ValidationError,
    IoError,
};

constexpr std::string_view error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ZeroExposure: return "ZeroExposure";
    case ErrorCode::UnsupportedInput: return "UnsupportedInput";
    case ErrorCode::SingularProjection: return "SingularProjection";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NormalizationDegenerate: return "NormalizationDegenerate";
    case ErrorCode::InfeasibleLongOnly: return "InfeasibleLongOnly";
    case ErrorCode::InfeasibleExposures: return "InfeasibleExposures";
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::RankLost: return "RankLost";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonMonotoneDates: return "NonMonotoneDates";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Exception carrying a structured error code. `what()` holds the detail
/// message only; `name()` gives the code as printed by the CLI.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view name() const noexcept { return error_name(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace rbf
