#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rtwin {

enum class ErrorCode {
    BadMagic,
    TruncatedPayload,
    TrailingBytes,
    NonFiniteHeader,
    NonFiniteSample,
    BadByte,
    BadHeader,
    BadRecord,
    IoFailure,
    InvalidArgument,
    WindowTooLarge,
    DimensionMismatch,
    AllNodataTile,
    UnknownTile,
    UnknownBand,
    ShapeMismatch,
    KernelTooLarge,
    IndexOutOfRange,
    BadSequenceLength,
    RangeTooShort,
    EmptyDataset,
    NonFiniteLoss,
    VersionMismatch,
    ZeroVariance,
    TooFewScores,
    MissingTile,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::NonFiniteHeader: return "NonFiniteHeader";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::BadByte: return "BadByte";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::BadRecord: return "BadRecord";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AllNodataTile: return "AllNodataTile";
    case ErrorCode::UnknownTile: return "UnknownTile";
    case ErrorCode::UnknownBand: return "UnknownBand";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::KernelTooLarge: return "KernelTooLarge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::BadSequenceLength: return "BadSequenceLength";
    case ErrorCode::RangeTooShort: return "RangeTooShort";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewScores: return "TooFewScores";
    case ErrorCode::MissingTile: return "MissingTile";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable code. what() holds the human message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

} // namespace rtwin
