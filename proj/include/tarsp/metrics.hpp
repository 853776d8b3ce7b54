#pragma once

#include <optional>
#include <span>

#include <json.hpp>

#include "tarsp/linalg.hpp"

namespace tarsp {

struct PointScores {
  std::optional<double> r2;  // undefined when either vector has zero variance
  double mae = 0.0;
  double rmse = 0.0;
};

/// r² is the squared Pearson correlation between truth and prediction, not
/// 1 - SSE/SST. Lengths must match and be >= 2.
PointScores point_scores(const VectorXd& truth, const VectorXd& pred);

/// (1/G) Σ|x_j - y| - (1/2G²) Σ_j Σ_k |x_j - x_k|, evaluated in O(G log G)
/// through the sorted-sample identity. G >= 2.
double crps_empirical(std::span<const double> samples, double truth);

struct IntervalScores {
  double int_score = 0.0;
  double cvg = 0.0;
};

/// Mean of (u - l) + (2/α)(l - y)1{y < l} + (2/α)(y - u)1{y > u}, and the
/// fraction of l <= y <= u. InvalidInterval when some l > u.
IntervalScores interval_scores(const VectorXd& lower, const VectorXd& upper, const VectorXd& truth, double alpha);

/// sqrt(tr((K - L)'(K - L))).
double frobenius_distance(const MatrixXd& k, const MatrixXd& l);

struct ScoreCard {
  std::optional<double> r2;
  double mae = 0.0;
  double rmse = 0.0;
  double crps = 0.0;
  double int_score = 0.0;
  double cvg = 0.0;
  double alpha = 0.05;
  Index n_scored = 0;
};

/// All prediction scores for a G x n sample matrix and its interval bounds.
/// The point prediction is `point`; CRPS is averaged over locations.
ScoreCard score_predictions(const VectorXd& truth, const VectorXd& point, const MatrixXd& samples,
                            const VectorXd& lower, const VectorXd& upper, double alpha);

nlohmann::json to_json(const ScoreCard& s);

}  // namespace tarsp
