#include "hrex/error.hpp"

namespace hrex {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
        case ErrorCode::EmbeddingNotPSD: return "EmbeddingNotPSD";
        case ErrorCode::InvalidDeltaSpec: return "InvalidDeltaSpec";
        case ErrorCode::SupportTooLarge: return "SupportTooLarge";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

}  // namespace hrex
