#include "tarsp/error.hpp"

namespace tarsp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid-dimension";
    case ErrorCode::InvalidEdge: return "invalid-edge";
    case ErrorCode::IsolatedRegion: return "isolated-region";
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::ParameterRange: return "parameter-range";
    case ErrorCode::NotPositiveDefinite: return "not-positive-definite";
    case ErrorCode::IllConditionedCorrelation: return "ill-conditioned-correlation";
    case ErrorCode::RepresentationMismatch: return "representation-mismatch";
    case ErrorCode::InvalidMask: return "invalid-mask";
    case ErrorCode::SingularDesign: return "singular-design";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::NumericalFailure: return "numerical-failure";
    case ErrorCode::UnavailableTruth: return "unavailable-truth";
    case ErrorCode::InvalidInterval: return "invalid-interval";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::Ingestion: return "ingestion";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::IllConditionedCorrelation:
    case ErrorCode::RepresentationMismatch:
    case ErrorCode::SingularDesign:
    case ErrorCode::NoConvergence:
    case ErrorCode::NumericalFailure:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace tarsp
