#include "dmcl/error.hpp"

namespace dmcl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::MissingHead: return "MissingHead";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::NegativeDistance: return "NegativeDistance";
    case ErrorCode::BadTarget: return "BadTarget";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::SingletonClass: return "SingletonClass";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::NoRelevant: return "NoRelevant";
    case ErrorCode::InvertedDistributions: return "InvertedDistributions";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::RankDeficient:
      return ErrorCategory::Numeric;
    case ErrorCode::SchemaError:
    case ErrorCode::BadSpec:
      return ErrorCategory::Schema;
    case ErrorCode::IoError:
    case ErrorCode::FormatError:
    case ErrorCode::ChecksumMismatch:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Domain;
  }
}

std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Schema: return "schema";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Numeric: return "numeric";
    case ErrorCategory::Domain: return "domain";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace dmcl
