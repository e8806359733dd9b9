#include "protokd/error.hpp"

namespace protokd {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateAtom: return "DegenerateAtom";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::MissingPrototypes: return "MissingPrototypes";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingLogits: return "MissingLogits";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyBasis: return "EmptyBasis";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSet: return "InvalidSet";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace protokd
