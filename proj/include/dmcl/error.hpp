#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmcl {

enum class ErrorCode {
  // numeric
  ZeroVector,
  NonFiniteValue,
  NonFiniteGradient,
  RankDeficient,
  // shape / contract
  DimMismatch,
  ShapeMismatch,
  TraceMismatch,
  MissingHead,
  EmptyMap,
  NegativeDistance,
  BadTarget,
  BadSpec,
  // data / domain
  InsufficientSamples,
  EmptyClass,
  SingletonClass,
  SingleClassDataset,
  EmptyValidation,
  NoRelevant,
  InvertedDistributions,
  TooFewClasses,
  ClassTooSmall,
  // input
  SchemaError,
  IoError,
  FormatError,
  ChecksumMismatch,
};

/// Coarse grouping used for process exit codes.
enum class ErrorCategory { Schema, Io, Numeric, Domain };

std::string_view to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);
/// "schema", "io", "numeric", "domain"
std::string_view to_string(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace dmcl
