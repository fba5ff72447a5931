#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fads {

/// Every typed failure the library can raise. The CLI maps the category of a
/// kind onto its exit code (usage = 1, data = 2, runtime = 3).
enum class ErrorKind {
  // usage
  kInvalidArgument,
  kUnknownAttribute,
  kKTooLarge,
  kNdTooLarge,
  kBadProportions,
  // data
  kMalformedRecord,
  kUnknownCategory,
  kMissingAttribute,
  kDimensionMismatch,
  kDuplicateId,
  kInvalidLabel,
  kNonFiniteValue,
  kEmbeddingIndexOutOfRange,
  kEmptyMatrix,
  kZeroNormVector,
  kEmptyCluster,
  kPoolTooSmall,
  kModelPoolMismatch,
  kUnresolvedId,
  kNotADistribution,
  kInsufficientGroups,
  kEmptyInput,
  kEmptySet,
  kZeroVariance,
  kLengthMismatch,
  kMissingGroundTruth,
  kMissingReport,
  // runtime
  kIoFailure,
  kClientFailure,
  kSkipRateExceeded,
};

enum class ErrorCategory { kUsage, kData, kRuntime };

std::string_view to_string(ErrorKind kind) noexcept;
ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace fads
