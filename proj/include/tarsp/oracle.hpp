#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tarsp/linalg.hpp"
#include "tarsp/model.hpp"

namespace tarsp {

struct OracleOptions {
  std::uint64_t seed = 1;
  Index mc_draws = 1'000'000;
  /// Above this standard error the Monte-Carlo result carries a warning.
  double max_standard_error = 1e-3;
};

struct OracleResult {
  double value = 0.0;
  /// Deterministic error bound (quadrature) or three standard errors (Monte Carlo).
  double tolerance = 0.0;
  std::string method;
  std::optional<std::string> warning;
};

/// Integrates the auxiliary bounds u out of the truncated kernel numerically,
/// starting from the indicator form rather than the closed-form exponent:
///   tar-c     product over i of the conditional kernels, τ_i² = τ²/d_i, σ_i² = σ²/d_i
///   tar-s     exp(-|ỹ|²/2τ²) · Π 1(|ỹ_i - (Aỹ)_i| < sqrt(-2σ² log u_i))
///   nngp-tar  as tar-s with (Bỹ)_i and bounds scaled by f_i
/// with τ² = δσ². Product midpoint quadrature over (0,1)^n for n <= 3,
/// Monte Carlo beyond. Test oracle only; n must be <= 6.
OracleResult truncation_density_oracle(const PrecisionModel& model, double delta, double sigma2,
                                       const VectorXd& y_tilde, const OracleOptions& opts = {});

/// The matching closed forms: the product of exp(-ỹ_i²/2τ_i² - r_i²/2σ_i²)
/// for tar-c, exp(-ỹ'Qỹ/2) with Q = model.precision(δ, σ²) otherwise.
double truncated_kernel_closed_form(const PrecisionModel& model, double delta, double sigma2,
                                    const VectorXd& y_tilde);

}  // namespace tarsp
