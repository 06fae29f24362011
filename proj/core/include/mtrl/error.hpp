#pragma once

#include <stdexcept>
#include <string>

namespace mtrl {

enum class ErrorCode {
  InvalidArgument,
  InvalidMatrix,
  NotPSD,
  UnstableSystem,
  DegenerateData,
  EmptyDictionary,
  DivergedOptimization,
  RangeViolation,
  NotErgodic,
  BadPartition,
  SampleTooShort,
  InvalidMoments,
  PreconditionViolated,
  InvalidPoints,
  SweepFailed,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can dispatch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace mtrl
