// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tokenprune {

enum class ErrorCode {
    DimensionMismatch,
    InvalidValue,
    EmptyInput,
    ZeroMass,
    ZeroMatrix,
    EmptyCorpus,
    StartOutOfRange,
    NonPositiveAverage,
    InvalidArgument,
    MissingReference,
    BadMagic,
    TruncatedFile,
    HeaderMismatch,
    IoFailure,
    ParseError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::StartOutOfRange: return "StartOutOfRange";
    case ErrorCode::NonPositiveAverage: return "NonPositiveAverage";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the class of error.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          m_code(code) {}

    ErrorCode code() const noexcept {
        return m_code;
    }

private:
    ErrorCode m_code;
};

}  // namespace tokenprune
