#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tarsp {

enum class ErrorCode {
  InvalidDimension,
  InvalidEdge,
  IsolatedRegion,
  InvalidInput,
  ParameterRange,
  NotPositiveDefinite,
  IllConditionedCorrelation,
  RepresentationMismatch,
  InvalidMask,
  SingularDesign,
  NoConvergence,
  NumericalFailure,
  UnavailableTruth,
  InvalidInterval,
  ShapeMismatch,
  Ingestion,
  Config,
};

std::string_view to_string(ErrorCode code);

/// True for failures that come from the numerics (factorizations, solvers)
/// rather than from the caller's input. The CLI maps these to exit code 3.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tarsp
