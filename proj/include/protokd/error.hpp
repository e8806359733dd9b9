#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protokd {

enum class ErrorCode {
  DegenerateAtom,
  Exhausted,
  EmptyGroup,
  MissingPrototypes,
  DimensionMismatch,
  MissingLogits,
  KTooLarge,
  EmptyBasis,
  InvalidConfig,
  InvalidSet,
  BadMagic,
  TruncatedPayload,
  VersionUnsupported,
  LengthMismatch,
  SchemaMismatch,
  ParseError,
  IoError,
};

/// Stable machine-readable name, e.g. "BadMagic".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace protokd
