#include "bpm/error.hpp"

namespace bpm {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidField: return "invalid-field";
    case ErrorCode::kDegenerateDesign: return "degenerate-design";
    case ErrorCode::kFitFailed: return "fit-failed";
    case ErrorCode::kDegenerateValidation: return "degenerate-validation";
    case ErrorCode::kModelValidationFailed: return "model-validation-failed";
    case ErrorCode::kNonFiniteObjective: return "non-finite-objective";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace bpm
