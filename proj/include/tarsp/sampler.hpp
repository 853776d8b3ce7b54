#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarsp/graph.hpp"
#include "tarsp/linalg.hpp"
#include "tarsp/model.hpp"
#include "tarsp/rng.hpp"

namespace tarsp {

/// Response, design and the observed/missing split. Entries of `y` at
/// missing regions are ignored (conventionally NaN). `truth` holds the full
/// response when it is known, e.g. for simulated data.
struct Dataset {
  VectorXd y;
  MatrixXd x;
  std::vector<bool> observed;
  std::vector<std::string> column_names;
  std::optional<VectorXd> truth;
  std::vector<Point> coords;

  Index size() const { return y.size(); }
  Index num_covariates() const { return x.cols(); }
  Index num_observed() const;
  std::vector<Index> observed_indices() const;
  std::vector<Index> missing_indices() const;

  /// Shape checks plus n_O >= p + 1 (InvalidMask) and full column rank of
  /// X_O (SingularDesign, rank tolerance 1e-10 * |X_O|).
  void validate() const;
};

/// Inverse-gamma prior IG(a, b) on σ². The grid lives on the PrecisionModel
/// and carries uniform prior mass.
struct PriorConfig {
  double a = 0.01;
  double b = 0.01;

  void validate() const;
};

struct SamplerOptions {
  /// Worker threads for the per-grid-value work; draws do not depend on it.
  int threads = 1;
};

struct PosteriorDraws {
  Family family = Family::TarC;
  std::vector<double> grid;
  VectorXd log_joint;      // log f(θ_k, y_O) per grid value, up to a common constant
  VectorXd probabilities;  // normalized f(θ_k | y_O)
  MatrixXd beta;           // G x p
  VectorXd sigma2;
  VectorXd theta;
  std::vector<Index> theta_index;
  std::uint64_t seed = 0;
  std::vector<std::string> column_names;

  Index size() const { return sigma2.size(); }
};

/// Q[observed, observed]: the precision of y_O is read off Q, never obtained
/// by inverting a covariance block.
SparseMatrix observed_precision(const SparseMatrix& q, const std::vector<bool>& observed);

/// Everything the direct sampler needs for one grid value.
struct ConditionalPosterior {
  double theta = 0.0;
  double log_joint = 0.0;
  double shape = 0.0;  // a + (n_O - p)/2
  double scale = 0.0;  // b + r/2, r the generalized-least-squares residual form
  VectorXd beta_hat;
  MatrixXd gram_factor;  // lower L with X_O'Q_oX_O = L L'

  double draw_sigma2(Engine& eng) const;
  VectorXd draw_beta(double sigma2, Engine& eng) const;
};

/// Computes the per-value posterior from a factorization of Q_o; `chol`
/// must already be analysed for Q_o's pattern.
ConditionalPosterior conditional_posterior(const VectorXd& y_o, const MatrixXd& x_o, const SparseMatrix& q_o,
                                           SparseCholesky& chol, const PriorConfig& prior,
                                           double log_prior);

/// log f(θ, y_O) = ½ logdet Q_o - ½ logdet X'Q_oX - (a + (n_O-p)/2) log(b + r/2)
/// + log π(θ), with r = (y - Xβ̂)'Q_o(y - Xβ̂) ≥ 0.
double log_joint_theta(const Dataset& data, const SparseMatrix& q_o, const PriorConfig& prior,
                       double log_prior = 0.0);

/// Exact draws θ ~ f(θ|y_O), σ² ~ IG(shape, scale), β ~ N(β̂, σ²(X'Q_oX)^{-1}).
/// Draw g uses its own derived RNG stream, so the result depends only on
/// (data, model, prior, G, seed).
PosteriorDraws sample_posterior(const Dataset& data, const PrecisionModel& model, const PriorConfig& prior,
                                Index draws, std::uint64_t seed, const SamplerOptions& opts = {});

/// Same sampler restricted to the CAR and SAR baselines.
PosteriorDraws sample_posterior_car_sar(const Dataset& data, const PrecisionModel& model,
                                        const PriorConfig& prior, Index draws, std::uint64_t seed,
                                        const SamplerOptions& opts = {});

struct Interval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Equal-tailed credible interval at level 1 - alpha with type-7 quantiles.
Interval summarize(const VectorXd& values, double alpha = 0.05);

/// `draw,beta_0..beta_{p-1},sigma2,theta`, full double precision.
void write_draws_csv(std::ostream& os, const PosteriorDraws& d);
/// Reads what write_draws_csv wrote; grid and family come from the caller.
PosteriorDraws read_draws_csv(std::istream& is);

/// Posterior means, 95% intervals and the grid mass table.
nlohmann::json summary_json(const PosteriorDraws& d);

}  // namespace tarsp
