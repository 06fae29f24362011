#include "mtrl/error.hpp"

namespace mtrl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::UnstableSystem: return "UnstableSystem";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::EmptyDictionary: return "EmptyDictionary";
    case ErrorCode::DivergedOptimization: return "DivergedOptimization";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::NotErgodic: return "NotErgodic";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::SampleTooShort: return "SampleTooShort";
    case ErrorCode::InvalidMoments: return "InvalidMoments";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::InvalidPoints: return "InvalidPoints";
    case ErrorCode::SweepFailed: return "SweepFailed";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace mtrl
