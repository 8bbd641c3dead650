#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmbench {

enum class ErrorCode {
  DegeneratePoint,
  SingularMatrix,
  SamplingExhausted,
  DegenerateQuad,
  DegenerateConfiguration,
  EmptyInput,
  NoSuccesses,
  MissingTag,
  ConflictingTag,
  UnknownProvider,
  DimensionMismatch,
  AllBranchesFailed,
  NonFiniteLoss,
  ParseError,
  SchemaViolation,
  DuplicateId,
  CapExceeded,
  OutOfBounds,
  MisalignedLists,
  NonPositiveScale,
  FingerprintMismatch,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every recoverable failure in the toolkit.
/// The code is the stable, testable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cmbench
