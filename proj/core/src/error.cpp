#include "fads/error.hpp"

namespace fads {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kUnknownAttribute: return "UnknownAttribute";
    case ErrorKind::kKTooLarge: return "KTooLarge";
    case ErrorKind::kNdTooLarge: return "NdTooLarge";
    case ErrorKind::kBadProportions: return "BadProportions";
    case ErrorKind::kMalformedRecord: return "MalformedRecord";
    case ErrorKind::kUnknownCategory: return "UnknownCategory";
    case ErrorKind::kMissingAttribute: return "MissingAttribute";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kInvalidLabel: return "InvalidLabel";
    case ErrorKind::kNonFiniteValue: return "NonFiniteValue";
    case ErrorKind::kEmbeddingIndexOutOfRange: return "EmbeddingIndexOutOfRange";
    case ErrorKind::kEmptyMatrix: return "EmptyMatrix";
    case ErrorKind::kZeroNormVector: return "ZeroNormVector";
    case ErrorKind::kEmptyCluster: return "EmptyCluster";
    case ErrorKind::kPoolTooSmall: return "PoolTooSmall";
    case ErrorKind::kModelPoolMismatch: return "ModelPoolMismatch";
    case ErrorKind::kUnresolvedId: return "UnresolvedId";
    case ErrorKind::kNotADistribution: return "NotADistribution";
    case ErrorKind::kInsufficientGroups: return "InsufficientGroups";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kEmptySet: return "EmptySet";
    case ErrorKind::kZeroVariance: return "ZeroVariance";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorKind::kMissingReport: return "MissingReport";
    case ErrorKind::kIoFailure: return "IoFailure";
    case ErrorKind::kClientFailure: return "ClientFailure";
    case ErrorKind::kSkipRateExceeded: return "SkipRateExceeded";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kUnknownAttribute:
    case ErrorKind::kKTooLarge:
    case ErrorKind::kNdTooLarge:
    case ErrorKind::kBadProportions:
      return ErrorCategory::kUsage;
    case ErrorKind::kIoFailure:
    case ErrorKind::kClientFailure:
    case ErrorKind::kSkipRateExceeded:
      return ErrorCategory::kRuntime;
    default:
      return ErrorCategory::kData;
  }
}

}  // namespace fads
