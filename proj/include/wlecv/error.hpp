#pragma once

#include <stdexcept>
#include <string>

namespace wlecv {

/// Broad class of a failure; the CLI maps it onto an exit code.
enum class ErrorKind {
  kData,       ///< malformed or out-of-domain input
  kNumerical,  ///< degenerate numerics (singular systems, flat objectives)
};

/// Library exception. `code()` is a stable short identifier such as
/// "singular-matrix" or "insufficient-data".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

namespace errc {
inline constexpr const char* kCovarianceUndefined = "covariance-undefined";
inline constexpr const char* kSingularMatrix = "singular-matrix";
inline constexpr const char* kDegenerateConstraint = "degenerate-constraint";
inline constexpr const char* kInsufficientData = "insufficient-data";
inline constexpr const char* kDegenerateSamples = "degenerate-samples";
inline constexpr const char* kDomainError = "domain-error";
inline constexpr const char* kOptimizationFailed = "optimization-failed";
inline constexpr const char* kIngestError = "ingest-error";
inline constexpr const char* kInvalidArgument = "invalid-argument";
}  // namespace errc

[[noreturn]] inline void throw_data(const char* code, const std::string& detail) {
  throw Error(ErrorKind::kData, code, detail);
}

[[noreturn]] inline void throw_numerical(const char* code, const std::string& detail) {
  throw Error(ErrorKind::kNumerical, code, detail);
}

}  // namespace wlecv
